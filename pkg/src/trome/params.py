"""Topology, loss model, and protocol parameter bundles."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

from .errors import ConfigError, InvalidConfig
from .radio import EnergyModel, RadioTimingModel


class Protocol(str, Enum):
    TROME = "trome"
    NAIVE = "naive"
    CTPWUR = "ctpwur"


class LossMode(str, Enum):
    PER_PACKET = "per_packet"
    PER_METASTEP = "per_metastep"


@dataclass(frozen=True)
class Topology:
    """A line of nodes, source first, sink last.

    The wake-up radio reaches only the next node toward the sink; the
    main radio reaches every node.  Both maps can be overridden for
    non-default experiments as sets of directed (sender, receiver) pairs.
    """

    node_ids: tuple[int, ...]
    wakeup_reach: frozenset = field(default=None)  # type: ignore[assignment]
    data_reach: frozenset = field(default=None)    # type: ignore[assignment]

    def __post_init__(self):
        ids = tuple(self.node_ids)
        if len(ids) < 2:
            raise ConfigError("topology needs at least two nodes")
        if len(set(ids)) != len(ids):
            raise ConfigError("node ids must be unique")
        object.__setattr__(self, "node_ids", ids)
        if self.wakeup_reach is None:
            fwd = frozenset((ids[k], ids[k + 1]) for k in range(len(ids) - 1))
            object.__setattr__(self, "wakeup_reach", fwd)
        if self.data_reach is None:
            full = frozenset((a, b) for a in ids for b in ids if a != b)
            object.__setattr__(self, "data_reach", full)
        if not self.wakeup_reach <= self.data_reach:
            raise ConfigError("wake-up reach must be a subset of data reach")
        for k in range(len(ids) - 1):
            if (ids[k], ids[k + 1]) not in self.wakeup_reach:
                raise ConfigError("wake-up reach must connect the line toward the sink")

    @property
    def m(self) -> int:
        return len(self.node_ids)

    @property
    def source(self) -> int:
        return self.node_ids[0]

    @property
    def sink(self) -> int:
        return self.node_ids[-1]

    def index_of(self, node_id: int) -> int:
        return self.node_ids.index(node_id)

    def next_hop(self, node_id: int):
        """Next node toward the sink, or None for the sink itself."""
        idx = self.index_of(node_id)
        return self.node_ids[idx + 1] if idx + 1 < len(self.node_ids) else None

    def rank_from_sink(self, node_id: int) -> int:
        """0 for the node adjacent to the sink, growing toward the source."""
        distance = len(self.node_ids) - 1 - self.index_of(node_id)
        return max(distance - 1, 0)

    def can_wake(self, sender: int, receiver: int) -> bool:
        return (sender, receiver) in self.wakeup_reach

    def can_hear(self, sender: int, receiver: int) -> bool:
        return (sender, receiver) in self.data_reach


@dataclass(frozen=True)
class LossModel:
    """Bernoulli channel: p governs wake-up signals, q main-radio packets."""

    p: float = 1.0
    q: float = 1.0
    mode: LossMode = LossMode.PER_METASTEP

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0 or not 0.0 <= self.q <= 1.0:
            raise InvalidConfig(f"p={self.p}, q={self.q} must lie in [0, 1]")


@dataclass(frozen=True)
class ProtocolParams:
    """Everything a node needs besides the topology.

    The turnaround constants reproduce the measured four-node timeline:
    a woken node needs ``t_wake_us`` from the end of the wake-up call to
    its first transmission, packet processing takes ``t_turn_us``, a relay
    needs ``t_fwd_us`` before forwarding, back-to-back transmissions are
    ``t_gap_us`` apart, and a data packet is acknowledged ``t_ack_us``
    after its last byte.  All waits are configurable per scenario.
    """

    ttl: int = 3
    packet_count: int = 1
    payload_size: int = 100
    queue_slots: int = 64
    retry_cap: int = 10

    timing: RadioTimingModel = field(default_factory=RadioTimingModel)
    energy: EnergyModel = field(default_factory=EnergyModel)

    # turnaround and wait constants (us)
    lbt_probe_us: int = 1000
    lbt_stagger_us: int = 150
    t_wake_us: int = 5000
    t_turn_us: int = 1000
    t_fwd_us: int = 2000
    t_gap_us: int = 300
    t_ack_us: int = 700
    t_decide_us: int = 500
    guard_us: int = 2000
    src_sleep_after_rreq_us: int = 16000
    data_wait_timeout_us: int = 8000
    backoff_base_us: int = 5000
    backoff_step_us: int = 5000

    def __post_init__(self):
        if self.ttl < 1 or self.ttl > 255:
            raise InvalidConfig(f"ttl {self.ttl} not in 1..255")
        if self.packet_count < 1:
            raise InvalidConfig("packet count must be >= 1")
        if not 1 <= self.payload_size <= 246:
            raise InvalidConfig(f"payload size {self.payload_size} not in 1..246")
        if not 1 <= self.queue_slots <= 64:
            raise InvalidConfig("queue slots must be in 1..64")
        if self.retry_cap < 1:
            raise InvalidConfig("retry cap must be >= 1")
        if self.t_fwd_us <= self.t_gap_us + self.timing.routing_packet_us:
            raise InvalidConfig(
                "t_fwd_us must exceed t_gap_us + routing airtime so a relay's "
                "forward never overlaps the upstream acknowledge"
            )

    # timeouts derived from the airtime model -------------------------------

    @property
    def wuc_ack_timeout_us(self) -> int:
        """Wait after a wake-up call before declaring the wake failed."""
        return self.t_wake_us + self.timing.mac_packet_us + self.guard_us

    @property
    def req_timeout_us(self) -> int:
        """Woken node's wait for the routing request before sleeping again."""
        return self.t_turn_us + self.timing.routing_packet_us + self.guard_us

    @property
    def data_ack_timeout_us(self) -> int:
        """Sender's wait after a data packet before re-queueing it."""
        return self.t_ack_us + self.timing.mac_packet_us + self.guard_us

    def rack_window_us(self, ttl: int | None = None) -> int:
        """Collection window for routing acknowledges, measured from the
        end of the routing request: long enough for the farthest relay."""
        hops = self.ttl if ttl is None else ttl
        per_hop = (self.t_fwd_us + self.timing.wuc_total_us + self.t_wake_us
                   + self.timing.mac_packet_us + self.t_turn_us
                   + self.timing.routing_packet_us)
        return hops * per_hop + self.t_fwd_us + self.timing.routing_packet_us + self.guard_us

    def with_overrides(self, **kwargs) -> "ProtocolParams":
        return replace(self, **kwargs)
