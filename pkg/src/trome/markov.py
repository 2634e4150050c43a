"""Expected-cost analysis of the three delivery algorithms.

Each protocol is modeled as an absorbing chain over meta-states: ``W``
states, in which one node attempts to wake its neighbor toward the sink,
and ``T`` states, in which the message holder transfers data.  Expected
delivery cost (time in us, or energy in mJ with energy-valued constants)
follows from one linear equation per reachable meta-state.

Tree routing (line of m nodes, message starting at node 1):

* ``W(i, j)`` - message at node i while node j wakes node j+1.  A step
  succeeds with probability p*q^5 (wake signal plus the five main-radio
  control packets) and extends the chain to ``W(i, j+1)``; when node
  j+1 is the sink, or the chain has grown ttl hops from the holder, the
  holder transfers directly to the last woken node.  On failure the
  holder falls back to the deepest awake node: retry ``W(i, i)`` when
  nothing is awake yet, otherwise transfer ``T(i, j)``.
* ``T(i, j)`` - data plus acknowledge, success q^2.  Success moves the
  message (``W(j, j)`` next, or absorption at the sink); failure restarts
  the holder's wake-up chain at ``W(i, i)``.

The naive algorithm wakes and transfers hop by hop (wake success p,
transfer success q^2, failures loop on the hop).  The relayed variant
forwards a wake-up through at most one intermediate node, then sends
data two hops; wake-ups carry no acknowledges, so the relayed wake step
succeeds with p*q^e (e configurable, default 2) and single-hop legs are
identical to the naive hop.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DegenerateProbability, SingularSystem
from .params import Protocol
from .radio import EnergyModel, RadioTimingModel, RadioState

RESIDUAL_REL_TOL = 1e-9
DELIVERED = "DELIVERED"


@dataclass(frozen=True)
class MetaState:
    """W(i, j): holder i, node j waking j+1.  T(i, j): transfer i -> j."""

    kind: str                  # "W" | "T"
    i: int
    j: int

    def __str__(self):
        if self.kind == "W":
            return f"w[{self.i},{self.j},{self.j + 1}]"
        return f"T[{self.i},{self.j}]"


@dataclass(frozen=True)
class CostConstants:
    """Per-branch step costs: success, partial failure, failure.

    Time-valued (us) by default; energy-valued (mJ) instances drive the
    energy expectations through the identical chain.
    """

    t_w1: float
    t_w2: float
    t_w3: float
    t_tx1: float
    t_tx2: float
    t_tx3: float

    def __post_init__(self):
        # zero is legal only for the internal wake/transfer cost splits
        for name, value in vars(self).items():
            if value < 0:
                raise ConfigError(f"cost constant {name} must not be negative")
        if self.t_w2 < self.t_w1 or self.t_w3 < self.t_w1:
            raise ConfigError("wake failure delays must not undercut the success time")
        if self.t_tx2 < self.t_tx1 or self.t_tx3 < self.t_tx1:
            raise ConfigError("transfer failure delays must not undercut the success time")

    def scale_transfer(self, factor: float) -> "CostConstants":
        return replace(self, t_tx1=self.t_tx1 * factor,
                       t_tx2=self.t_tx2 * factor, t_tx3=self.t_tx3 * factor)

    def wake_only(self) -> dict:
        return {"t_tx1": 0.0, "t_tx2": 0.0, "t_tx3": 0.0}

    def transfer_only(self) -> dict:
        return {"t_w1": 0.0, "t_w2": 0.0, "t_w3": 0.0}


@dataclass(frozen=True)
class Branch:
    probability: float
    cost_key: str              # field name in CostConstants
    successor: MetaState | str


@dataclass
class ExpectationSystem:
    """A x = b over the reachable meta-states of one protocol chain."""

    protocol: Protocol
    states: list[MetaState]
    transitions: dict          # MetaState -> list[Branch]
    costs: CostConstants
    start: MetaState

    def index(self, state: MetaState) -> int:
        return self._index[state]

    def __post_init__(self):
        self._index = {s: k for k, s in enumerate(self.states)}

    def matrix(self, cost_overrides: dict | None = None):
        """Assemble (A, b); ``cost_overrides`` zeroes or replaces branch costs."""
        costs = replace(self.costs, **cost_overrides) if cost_overrides else self.costs
        n = len(self.states)
        a = np.eye(n)
        b = np.zeros(n)
        for state in self.states:
            row = self._index[state]
            for br in self.transitions[state]:
                b[row] += br.probability * getattr(costs, br.cost_key)
                if br.successor != DELIVERED:
                    a[row, self._index[br.successor]] -= br.probability
        return a, b


# ---------------------------------------------------------------------------
# chain builders
# ---------------------------------------------------------------------------

def _check_inputs(m: int, p: float, q: float):
    if m < 2:
        raise ConfigError(f"need at least two nodes, got m={m}")
    if p * q == 0.0:
        raise DegenerateProbability(f"p={p}, q={q}: delivery never succeeds")
    if not (0.0 < p <= 1.0 and 0.0 < q <= 1.0):
        raise ConfigError(f"p={p}, q={q} must lie in (0, 1]")


def build_trome(m: int, p: float, q: float, costs: CostConstants,
                ttl: int = 3) -> ExpectationSystem:
    """Expectation system for tree routing over a line of m nodes."""
    _check_inputs(m, p, q)
    if ttl < 1:
        raise ConfigError("ttl must be >= 1")

    wake_ok = p * q**5
    wake_part = p * (1.0 - q**5)
    wake_fail = 1.0 - p
    tx_ok = q * q
    tx_part = q * (1.0 - q)
    tx_fail = 1.0 - q

    transitions: dict[MetaState, list[Branch]] = {}

    def w_state(i: int, j: int) -> MetaState:
        return MetaState("W", i, j)

    def t_state(i: int, j: int) -> MetaState:
        return MetaState("T", i, j)

    def expand(state: MetaState):
        if state in transitions:
            return
        if state.kind == "W":
            i, j = state.i, state.j
            target = j + 1
            if target == m:
                succ = t_state(i, m)
            elif target - i == ttl:
                succ = t_state(i, target)
            else:
                succ = w_state(i, target)
            fall = w_state(i, i) if j == i else t_state(i, j)
            transitions[state] = [
                Branch(wake_ok, "t_w1", succ),
                Branch(wake_part, "t_w2", fall),
                Branch(wake_fail, "t_w3", fall),
            ]
            expand(succ)
            expand(fall)
        else:
            i, j = state.i, state.j
            succ = DELIVERED if j == m else w_state(j, j)
            retry = w_state(i, i)
            transitions[state] = [
                Branch(tx_ok, "t_tx1", succ),
                Branch(tx_part, "t_tx2", retry),
                Branch(tx_fail, "t_tx3", retry),
            ]
            if succ != DELIVERED:
                expand(succ)
            expand(retry)

    start = MetaState("W", 1, 1)
    expand(start)
    states = sorted(transitions, key=lambda s: (s.i, s.kind, s.j))
    return ExpectationSystem(Protocol.TROME, states, transitions, costs, start)


def build_naive(m: int, p: float, q: float, costs: CostConstants) -> ExpectationSystem:
    """Hop-by-hop chain: wake (success p), then transfer (success q^2)."""
    _check_inputs(m, p, q)
    transitions: dict[MetaState, list[Branch]] = {}
    for i in range(1, m):
        wake = MetaState("W", i, i)
        xfer = MetaState("T", i, i + 1)
        transitions[wake] = [
            Branch(p, "t_w1", xfer),
            Branch(1.0 - p, "t_w3", wake),
        ]
        succ = DELIVERED if i + 1 == m else MetaState("W", i + 1, i + 1)
        transitions[xfer] = [
            Branch(q * q, "t_tx1", succ),
            Branch(q * (1.0 - q), "t_tx2", wake),
            Branch(1.0 - q, "t_tx3", wake),
        ]
    states = sorted(transitions, key=lambda s: (s.i, s.kind, s.j))
    return ExpectationSystem(Protocol.NAIVE, states, transitions, costs, MetaState("W", 1, 1))


def ctpwur_legs(m: int) -> list[tuple[int, int, bool]]:
    """(from, to, relayed) legs: two-hop with one relay while possible."""
    legs = []
    pos = 1
    while pos < m:
        if m - pos >= 2:
            legs.append((pos, pos + 2, True))
            pos += 2
        else:
            legs.append((pos, pos + 1, False))
            pos += 1
    return legs


def build_ctpwur(m: int, p: float, q: float, costs: CostConstants,
                 relayed_costs: CostConstants | None = None,
                 relay_wake_exponent: int = 2) -> ExpectationSystem:
    """One-relay chain: unacknowledged wake-ups, two-hop data legs.

    A relayed wake step succeeds with p * q**relay_wake_exponent; the
    single-hop leg is exactly the naive hop.  ``relayed_costs`` carries
    the doubled wake airtime of a forwarded wake-up (defaults to w1..w3
    scaled by two on top of ``costs``).
    """
    _check_inputs(m, p, q)
    if relayed_costs is None:
        relayed_costs = replace(costs, t_w1=2 * costs.t_w1,
                                t_w2=2 * costs.t_w2, t_w3=2 * costs.t_w3)
    transitions: dict[MetaState, list[Branch]] = {}
    leg_costs: dict[MetaState, CostConstants] = {}
    legs = ctpwur_legs(m)
    for idx, (start_pos, end_pos, relayed) in enumerate(legs):
        wake = MetaState("W", start_pos, end_pos - 1)
        xfer = MetaState("T", start_pos, end_pos)
        wake_ok = p * q**relay_wake_exponent if relayed else p
        transitions[wake] = [
            Branch(wake_ok, "t_w1", xfer),
            Branch(p - wake_ok, "t_w2", wake),
            Branch(1.0 - p, "t_w3", wake),
        ] if relayed else [
            Branch(p, "t_w1", xfer),
            Branch(1.0 - p, "t_w3", wake),
        ]
        succ = DELIVERED if idx + 1 == len(legs) else MetaState("W", legs[idx + 1][0], legs[idx + 1][1] - 1)
        transitions[xfer] = [
            Branch(q * q, "t_tx1", succ),
            Branch(q * (1.0 - q), "t_tx2", wake),
            Branch(1.0 - q, "t_tx3", wake),
        ]
        leg_costs[wake] = relayed_costs if relayed else costs
        leg_costs[xfer] = costs
    states = sorted(transitions, key=lambda s: (s.i, s.kind, s.j))
    system = ExpectationSystem(Protocol.CTPWUR, states, transitions, costs,
                               MetaState("W", 1, legs[0][1] - 1))
    system.leg_costs = leg_costs
    return system


def build_system(protocol: Protocol, m: int, p: float, q: float,
                 costs: CostConstants, ttl: int = 3) -> ExpectationSystem:
    if protocol is Protocol.TROME:
        return build_trome(m, p, q, costs, ttl=ttl)
    if protocol is Protocol.NAIVE:
        return build_naive(m, p, q, costs)
    if protocol is Protocol.CTPWUR:
        return build_ctpwur(m, p, q, costs)
    raise ConfigError(f"unknown protocol {protocol}")


# ---------------------------------------------------------------------------
# solving
# ---------------------------------------------------------------------------

def _assemble(system: ExpectationSystem, cost_overrides: dict | None = None):
    leg_costs = getattr(system, "leg_costs", None)
    if leg_costs is None:
        return system.matrix(cost_overrides)
    # per-state cost tables (relayed wake legs cost twice the single wake)
    n = len(system.states)
    a = np.eye(n)
    b = np.zeros(n)
    for state in system.states:
        row = system.index(state)
        costs = leg_costs[state]
        if cost_overrides:
            costs = replace(costs, **cost_overrides)
        for br in system.transitions[state]:
            b[row] += br.probability * getattr(costs, br.cost_key)
            if br.successor != DELIVERED:
                a[row, system.index(br.successor)] -= br.probability
    return a, b


def solve(system: ExpectationSystem, start: MetaState | None = None,
          cost_overrides: dict | None = None) -> float:
    """Expected cost from ``start`` (default: the chain's entry state).

    Direct dense solve (LAPACK partial-pivot elimination) with a residual
    check of 1e-9 relative to ||b||.
    """
    a, b = _assemble(system, cost_overrides)
    try:
        x = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    residual = np.max(np.abs(a @ x - b))
    bound = RESIDUAL_REL_TOL * max(np.max(np.abs(b)), 1.0)
    if residual > bound:
        raise SingularSystem(f"residual {residual} exceeds {bound}")
    state = system.start if start is None else start
    return float(x[system.index(state)])


def multi_packet_cost(protocol: Protocol, m: int, p: float, q: float,
                      costs: CostConstants, n_packets: int, ttl: int = 3) -> float:
    """Expected cost of delivering ``n_packets`` payloads.

    Tree routing pays the wake-up chain once per established link and
    scales only the transfer legs with the packet count; the naive and
    one-relay algorithms repeat the full per-packet sequence.
    """
    if n_packets < 1:
        raise ConfigError("packet count must be >= 1")
    system = build_system(protocol, m, p, q, costs, ttl=ttl)
    if protocol is Protocol.TROME:
        wake_part = solve(system, cost_overrides=system.costs.wake_only())
        transfer_part = solve(system, cost_overrides=system.costs.transfer_only())
        return wake_part + n_packets * transfer_part
    return n_packets * solve(system)


# ---------------------------------------------------------------------------
# default cost constants, derived from the airtime and energy models
# ---------------------------------------------------------------------------

def _tx_energy_mJ(energy: EnergyModel, state: RadioState, airtime_us: int) -> float:
    return energy.voltage * (energy.current_mA(state) / 1000.0) * airtime_us / 1000.0


def _packet_energy_mJ(energy: EnergyModel, airtime_us: int, wuc: bool = False) -> float:
    """Network energy of one packet: transmit side plus receive side."""
    if wuc:
        # the wake-up receiver listens at sleep current; only TX counts
        return _tx_energy_mJ(energy, RadioState.TX_WUC, airtime_us)
    return (_tx_energy_mJ(energy, RadioState.TX_DATA, airtime_us)
            + _tx_energy_mJ(energy, RadioState.RX, airtime_us))


def default_time_costs(protocol: Protocol, timing: RadioTimingModel,
                       payload_size: int, guard_us: int = 2000) -> CostConstants:
    """Per-step airtime sums; failure delays add one timeout guard."""
    wuc = timing.wuc_total_us
    mac = timing.mac_packet_us
    routing = timing.routing_packet_us
    data_mac = mac + payload_size * timing.payload_us_per_byte
    data_routing = routing + payload_size * timing.payload_us_per_byte
    if protocol is Protocol.TROME:
        # wake step: WUC + WUC ACK + request/forward + routing acknowledge
        t_w1 = wuc + mac + 2 * routing
        t_tx1 = data_routing + mac
    else:
        # naive and one-relay: bare WUC, then MAC data + MAC acknowledge
        t_w1 = wuc
        t_tx1 = data_mac + mac
    return CostConstants(
        t_w1=t_w1, t_w2=t_w1 + guard_us, t_w3=t_w1 + guard_us,
        t_tx1=t_tx1, t_tx2=t_tx1 + guard_us, t_tx3=t_tx1 + guard_us,
    )


def default_energy_costs(protocol: Protocol, timing: RadioTimingModel,
                         energy: EnergyModel, payload_size: int,
                         guard_us: int = 2000) -> CostConstants:
    """Network energy per step; failures add the guard wait at MCU current
    on both ends of the link."""
    wuc = _packet_energy_mJ(energy, timing.wuc_total_us, wuc=True)
    mac = _packet_energy_mJ(energy, timing.mac_packet_us)
    routing = _packet_energy_mJ(energy, timing.routing_packet_us)
    data_mac = _packet_energy_mJ(energy, timing.mac_packet_us
                                 + payload_size * timing.payload_us_per_byte)
    data_routing = _packet_energy_mJ(energy, timing.routing_packet_us
                                     + payload_size * timing.payload_us_per_byte)
    guard = 2 * energy.voltage * (energy.i_mcu_run_mA / 1000.0) * guard_us / 1000.0
    if protocol is Protocol.TROME:
        e_w1 = wuc + mac + 2 * routing
        e_tx1 = data_routing + mac
    else:
        e_w1 = wuc
        e_tx1 = data_mac + mac
    return CostConstants(
        t_w1=e_w1, t_w2=e_w1 + guard, t_w3=e_w1 + guard,
        t_tx1=e_tx1, t_tx2=e_tx1 + guard, t_tx3=e_tx1 + guard,
    )
