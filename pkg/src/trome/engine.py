"""Event-driven protocol state machines.

One ``step`` call maps (node state, event) to (new state, actions); it is
a pure function, so identical inputs always produce identical outputs and
machines can be replayed or fuzzed in isolation.  The simulator executes
the returned actions against the shared channel.

Actions carry explicit pre-transmission gaps together with the power
bucket the node occupies during the gap (deep sleep with a wake timer,
MCU-on idle, receiver on, or carrier hold).  These gaps encode the
turnaround behavior of the real nodes: boot time after a wake-up call,
packet processing, forwarding preparation, and acknowledge turnaround.

Timers are generation-counted: any state transition that arms a new
timer invalidates every older one, and a stale ``TimerFired`` is ignored
as a logged no-op, never an error.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

from . import frames
from .errors import NoCapableTarget
from .params import Protocol, ProtocolParams, Topology


class Phase(str, Enum):
    SLEEP = "SLEEP"
    MEAS = "MEAS"
    STORE = "STORE"              # data queued, acquiring the channel
    SEND_WAKEUP = "SEND_WAKEUP"  # wake-up call out, awaiting its acknowledge
    SEND_R_REQ = "SEND_R_REQ"
    WAIT_R_ACK = "WAIT_R_ACK"    # collecting routing acknowledges
    SEND_DATA = "SEND_DATA"      # burst in progress
    RELAY_FWD = "RELAY_FWD"      # forwarding the wake-up chain
    RX_WAIT = "RX_WAIT"          # awake, waiting for request or data


class Wait(str, Enum):
    """Power bucket occupied during a gap or armed-timer window."""

    SLEEP = "SLEEP"
    DELAY = "DELAY"
    RX = "RX"
    CARRIER = "CARRIER"          # transmitter holds the channel


# --- events ----------------------------------------------------------------

@dataclass(frozen=True)
class WakeUpDetected:
    waker: int
    flagged: bool = False        # one-relay protocol: forward this wake-up


@dataclass(frozen=True)
class FrameReceived:
    frame: object                # decoded MAC-level frame
    mac_src: int
    mac_dest: int
    payload_items: tuple = ()    # (payload_id, bytes) carried by a data frame


@dataclass(frozen=True)
class TimerFired:
    gen: int


@dataclass(frozen=True)
class ChannelProbed:
    busy: bool


@dataclass(frozen=True)
class AppSubmit:
    items: tuple                 # ((payload_id, bytes), ...)


ProtocolEvent = WakeUpDetected | FrameReceived | TimerFired | ChannelProbed | AppSubmit


# --- actions ---------------------------------------------------------------

@dataclass(frozen=True)
class ProbeChannel:
    delay_us: int = 0
    lead: Wait = Wait.SLEEP


@dataclass(frozen=True)
class SendWuc:
    target: int
    delay_us: int = 0
    lead: Wait = Wait.SLEEP
    flagged: bool = False


@dataclass(frozen=True)
class SendFrame:
    mac_dest: int
    frame: object
    delay_us: int = 0
    lead: Wait = Wait.SLEEP
    payload_items: tuple = ()


@dataclass(frozen=True)
class HoldCarrier:
    duration_us: int
    delay_us: int = 0


@dataclass(frozen=True)
class SetTimer:
    delay_us: int                # measured from the end of this step's last TX
    gen: int
    radio: Wait = Wait.SLEEP


@dataclass(frozen=True)
class EnterSleep:
    pass


@dataclass(frozen=True)
class DeliverToApp:
    items: tuple


@dataclass(frozen=True)
class Backoff:
    delay_us: int
    gen: int


@dataclass(frozen=True)
class NoOp:
    reason: str


ProtocolAction = (ProbeChannel | SendWuc | SendFrame | HoldCarrier | SetTimer
                  | EnterSleep | DeliverToApp | Backoff | NoOp)


@dataclass(frozen=True)
class AckInfo:
    node_id: int
    hop_distance: int
    free_slots: int
    lqi: int


@dataclass(frozen=True)
class NodeState:
    node_id: int
    phase: Phase = Phase.SLEEP
    timer_gen: int = 0
    queue: tuple = ()            # (payload_id, bytes) awaiting transmission
    collected_acks: tuple = ()
    pending_ttl: int = 0
    napping: bool = False        # source asleep inside the collection window
    retries: int = 0             # whole-transaction retries
    packet_retries: int = 0
    burst: tuple = ()            # remaining (payload_id, bytes) of this burst
    burst_target: int = -1
    # receiver side
    expected_count: int = 0
    received_count: int = 0
    rx_src: int = -1             # routing source of the incoming burst
    rx_dest: int = -1            # routing destination of the incoming burst
    received_ids: frozenset = frozenset()
    failed: bool = False


# ---------------------------------------------------------------------------
# decision helpers
# ---------------------------------------------------------------------------

def decide_target(acks, needed: int) -> int:
    """Pick the forwarding target from collected routing acknowledges.

    Prefers responders with room for the whole burst, then falls back to
    any responder with at least one free slot; within the pool the
    farthest hop wins, ties broken by more free slots, then smaller id.
    """
    acks = list(acks)
    if not acks:
        raise NoCapableTarget("no routing acknowledges collected")
    pool = [a for a in acks if a.free_slots >= needed]
    if not pool:
        pool = [a for a in acks if a.free_slots >= 1]
    if not pool:
        raise NoCapableTarget("every responder reports zero free slots")
    pool.sort(key=lambda a: (-a.hop_distance, -a.free_slots, a.node_id))
    return pool[0].node_id


def backoff_duration(node_id: int, params: ProtocolParams, topology: Topology) -> int:
    """Deterministic contention backoff, longer farther from the sink."""
    return params.backoff_base_us + params.backoff_step_us * topology.rank_from_sink(node_id)


def probe_stagger(node_id: int, params: ProtocolParams, topology: Topology) -> int:
    """Id-derived probe offset; distinct per contender so two listen
    windows never end at the same microsecond."""
    rank = topology.rank_from_sink(node_id)
    return rank * params.lbt_stagger_us + rank


# ---------------------------------------------------------------------------
# machine
# ---------------------------------------------------------------------------

def step(state: NodeState, event: ProtocolEvent, protocol: Protocol,
         params: ProtocolParams, topology: Topology):
    """Advance one node by one event; returns (state', actions)."""
    machine = _MACHINES[protocol]
    return machine(state, event, params, topology)


def _ignore(state: NodeState, event) -> tuple:
    return state, [NoOp(f"{type(event).__name__} ignored in {state.phase.value}")]


def _routing_of(event: FrameReceived):
    """Decode the routing header riding inside a MAC data frame."""
    if not isinstance(event.frame, frames.MacDataFrame):
        return None
    payload = event.frame.payload
    if len(payload) < 4:
        return None
    try:
        return frames.decode_routing(payload[:4])
    except Exception:
        return None


def _free_slots(state: NodeState, params: ProtocolParams) -> int:
    return min(max(params.queue_slots - len(state.queue), 0), frames.MAX_SLOTS)


def _wuc_ack(node_id: int) -> frames.WucAckFrame:
    return frames.WucAckFrame(receiver_id=node_id)


def _mac_data_with_routing(src: int, dest: int, routing, app: bytes = b"") -> frames.MacDataFrame:
    return frames.MacDataFrame(src, dest, frames.encode_routing(routing) + app)


def _enter_store(state: NodeState, params: ProtocolParams, topology: Topology,
                 delay_extra: int = 0):
    """Queue is non-empty: start acquiring the channel."""
    probe = ProbeChannel(delay_us=delay_extra + probe_stagger(state.node_id, params, topology),
                         lead=Wait.SLEEP)
    return replace(state, phase=Phase.STORE, collected_acks=(), napping=False), [probe]


def _give_up(state: NodeState) -> tuple:
    return replace(state, phase=Phase.SLEEP, failed=True, burst=()), [EnterSleep()]


def _retry_transaction(state: NodeState, params: ProtocolParams, topology: Topology):
    if state.retries + 1 > params.retry_cap:
        return _give_up(state)
    gen = state.timer_gen + 1
    backoff = Backoff(backoff_duration(state.node_id, params, topology), gen)
    return replace(state, phase=Phase.STORE, retries=state.retries + 1,
                   timer_gen=gen, napping=False, collected_acks=()), [backoff]


# --- tree-routing machine ---------------------------------------------------

def _trome_step(state: NodeState, event, params: ProtocolParams, topology: Topology):
    handler = {
        AppSubmit: _trome_submit,
        ChannelProbed: _trome_probed,
        WakeUpDetected: _woken,
        FrameReceived: _trome_frame,
        TimerFired: _trome_timer,
    }.get(type(event))
    if handler is None:
        return _ignore(state, event)
    return handler(state, event, params, topology)


def _trome_submit(state, event, params, topology):
    queue = state.queue + tuple(event.items)
    if len(queue) > params.queue_slots:
        queue = queue[: params.queue_slots]
    state = replace(state, queue=queue)
    if state.phase is not Phase.SLEEP:
        return state, [NoOp("submission queued mid-transaction")]
    return _enter_store(state, params, topology)


def _trome_probed(state, event, params, topology):
    if state.phase is not Phase.STORE:
        return _ignore(state, event)
    if event.busy:
        return _retry_transaction(state, params, topology)
    nxt = topology.next_hop(state.node_id)
    if nxt is None:
        return _give_up(state)
    gen = state.timer_gen + 1
    return (replace(state, phase=Phase.SEND_WAKEUP, timer_gen=gen),
            [SendWuc(nxt, delay_us=0, lead=Wait.SLEEP),
             SetTimer(params.wuc_ack_timeout_us, gen, radio=Wait.DELAY)])


def _woken(state, event, params, topology):
    """Wake-up call for this node: boot, acknowledge, await the request."""
    if state.phase is not Phase.SLEEP:
        return state, [NoOp("wake-up while already awake")]
    gen = state.timer_gen + 1
    return (replace(state, phase=Phase.RX_WAIT, timer_gen=gen,
                    expected_count=0, received_count=0),
            [SendFrame(event.waker, _wuc_ack(state.node_id),
                       delay_us=params.t_wake_us, lead=Wait.SLEEP),
             SetTimer(params.req_timeout_us, gen, radio=Wait.SLEEP)])


def _trome_frame(state, event, params, topology):
    frame = event.frame
    if event.mac_dest != state.node_id:
        return state, [NoOp("frame for another node")]
    routing = _routing_of(event)

    if isinstance(frame, frames.WucAckFrame):
        if state.phase is Phase.SEND_WAKEUP:
            return _trome_send_request(state, params, topology)
        if state.phase is Phase.RELAY_FWD:
            return _trome_forward_request(state, params, topology)
        return _ignore(state, event)

    if isinstance(routing, frames.RoutingRequest):
        if state.phase is not Phase.RX_WAIT:
            return _ignore(state, event)
        return _trome_handle_request(state, routing, params, topology)

    if isinstance(routing, frames.RoutingRequestAck):
        if state.phase is not Phase.WAIT_R_ACK:
            return _ignore(state, event)
        return _trome_collect_ack(state, event.mac_src, routing, params, topology)

    if isinstance(routing, frames.RoutingData):
        if state.phase is not Phase.RX_WAIT:
            return _ignore(state, event)
        return _receive_data(state, event, routing.r_src_id, routing.r_dest_id,
                             params, topology, Protocol.TROME)

    if isinstance(frame, frames.MacAckFrame):
        if state.phase is Phase.SEND_DATA and event.mac_src == state.burst_target:
            return _trome_burst_acked(state, params, topology)
        return _ignore(state, event)

    return _ignore(state, event)


def _trome_send_request(state, params, topology):
    nxt = topology.next_hop(state.node_id)
    slots = min(len(state.queue), frames.MAX_SLOTS)
    request = frames.RoutingRequest(slots, state.node_id, topology.sink, params.ttl)
    gen = state.timer_gen + 1
    return (replace(state, phase=Phase.WAIT_R_ACK, timer_gen=gen,
                    pending_ttl=params.ttl, collected_acks=(), napping=True),
            [SendFrame(nxt, _mac_data_with_routing(state.node_id, nxt, request),
                       delay_us=params.t_turn_us, lead=Wait.SLEEP),
             SetTimer(params.src_sleep_after_rreq_us, gen, radio=Wait.SLEEP)])


def _trome_collect_ack(state, mac_src, ack, params, topology):
    hop = max(state.pending_ttl - ack.current_ttl, 1)
    info = AckInfo(mac_src, hop, ack.free_slots, ack.lqi)
    state = replace(state, collected_acks=state.collected_acks + (info,))
    # nothing farther can answer once the chain hit TTL zero or the sink
    if ack.current_ttl == 0 or mac_src == topology.sink:
        return _trome_decide(state, params, topology)
    return state, [NoOp("acknowledge collected")]


def _trome_decide(state, params, topology):
    try:
        target = decide_target(state.collected_acks, len(state.queue))
    except NoCapableTarget:
        return _retry_transaction(state, params, topology)
    target_free = max(a.free_slots for a in state.collected_acks if a.node_id == target)
    burst = state.queue[: min(len(state.queue), target_free)]
    state = replace(state, phase=Phase.SEND_DATA, burst=burst, burst_target=target,
                    packet_retries=0, napping=False)
    return _trome_send_packet(state, params, first=True)


def _trome_send_packet(state, params, first=False):
    payload_id, body = state.burst[0]
    routing = frames.RoutingData(state.node_id, topology_dest(state), len(body))
    mac = _mac_data_with_routing(state.node_id, state.burst_target, routing, body)
    gen = state.timer_gen + 1
    delay = params.t_decide_us if first else 0
    return (replace(state, timer_gen=gen),
            [SendFrame(state.burst_target, mac, delay_us=delay, lead=Wait.SLEEP,
                       payload_items=((payload_id, body),)),
             SetTimer(params.data_ack_timeout_us, gen, radio=Wait.DELAY)])


def topology_dest(state: NodeState) -> int:
    """Routing destination carried by outgoing data: set when the burst
    was planned (the line's sink)."""
    return state.rx_dest if state.rx_dest >= 0 else state.burst_dest  # pragma: no cover


def _trome_burst_acked(state, params, topology):
    sent = state.burst[0]
    queue = tuple(item for item in state.queue if item[0] != sent[0])
    state = replace(state, queue=queue, burst=state.burst[1:], packet_retries=0)
    if state.burst:
        return _trome_send_packet(state, params)
    if state.queue:
        # burst was smaller than the backlog: new transaction for the rest
        return _enter_store(replace(state, retries=0), params, topology,
                            delay_extra=params.t_gap_us)
    return replace(state, phase=Phase.SLEEP), [EnterSleep()]


def _trome_forward_request(state, params, topology):
    """Relay got the wake-up acknowledge: forward request, answer source."""
    nxt = topology.next_hop(state.node_id)
    fwd = frames.RoutingRequest(state.expected_promised, state.rx_src,
                                state.rx_dest, state.pending_ttl)
    ack = frames.RoutingRequestAck(state.pending_ttl, 0, _free_slots(state, params))
    gen = state.timer_gen + 1
    return (replace(state, phase=Phase.RX_WAIT, timer_gen=gen),
            [SendFrame(nxt, _mac_data_with_routing(state.node_id, nxt, fwd),
                       delay_us=params.t_turn_us, lead=Wait.SLEEP),
             SendFrame(state.rx_src,
                       _mac_data_with_routing(state.node_id, state.rx_src, ack),
                       delay_us=params.t_gap_us, lead=Wait.SLEEP),
             SetTimer(params.data_wait_timeout_us, gen, radio=Wait.RX)])


def _trome_handle_request(state, request, params, topology):
    """Routing request or forwarded request reached this woken node."""
    remaining_ttl = max(request.ttl - 1, 0)
    free = _free_slots(state, params)
    state = replace(state, pending_ttl=remaining_ttl, rx_src=request.r_src_id,
                    rx_dest=request.r_dest_id,
                    expected_count=min(request.slots, free),
                    expected_promised=request.slots, received_count=0)
    nxt = topology.next_hop(state.node_id)
    at_end = (state.node_id == request.r_dest_id or remaining_ttl == 0 or nxt is None)
    if at_end:
        ack = frames.RoutingRequestAck(remaining_ttl, 0, free)
        gen = state.timer_gen + 1
        return (replace(state, timer_gen=gen),
                [SendFrame(request.r_src_id,
                           _mac_data_with_routing(state.node_id, request.r_src_id, ack),
                           delay_us=params.t_fwd_us, lead=Wait.SLEEP),
                 SetTimer(params.data_wait_timeout_us, gen, radio=Wait.RX)])
    gen = state.timer_gen + 1
    return (replace(state, phase=Phase.RELAY_FWD, timer_gen=gen),
            [SendWuc(nxt, delay_us=params.t_fwd_us, lead=Wait.SLEEP),
             SetTimer(params.wuc_ack_timeout_us, gen, radio=Wait.DELAY)])


def _receive_data(state, event, r_src, r_dest, params, topology, protocol):
    """A data packet addressed to this node, any protocol."""
    actions = [SendFrame(event.mac_src, frames.MacAckFrame(state.node_id, event.mac_src),
                         delay_us=params.t_ack_us, lead=Wait.SLEEP)]
    new_ids = state.received_ids
    queue = state.queue
    delivered = []
    fresh = 0
    for payload_id, body in event.payload_items:
        if payload_id in new_ids:
            continue
        new_ids = new_ids | {payload_id}
        fresh += 1
        if state.node_id == r_dest:
            delivered.append((payload_id, body))
        else:
            queue = queue + ((payload_id, body),)
    if delivered:
        actions.append(DeliverToApp(tuple(delivered)))
    state = replace(state, received_ids=new_ids, queue=queue,
                    received_count=state.received_count + fresh,
                    rx_src=r_src, rx_dest=r_dest)
    burst_done = state.expected_count and state.received_count >= state.expected_count
    if protocol is not Protocol.TROME:
        burst_done = True    # hop-by-hop sends exactly one packet per wake
    if burst_done:
        if state.node_id != r_dest and state.queue:
            new_state, more = _enter_store(replace(state, retries=0), params, topology,
                                           delay_extra=params.t_gap_us)
            return new_state, actions + more
        return replace(state, phase=Phase.SLEEP), actions + [EnterSleep()]
    gen = state.timer_gen + 1
    actions.append(SetTimer(params.data_wait_timeout_us, gen, radio=Wait.RX))
    return replace(state, timer_gen=gen), actions


def _trome_timer(state, event, params, topology):
    if event.gen != state.timer_gen:
        return state, [NoOp("stale timer")]
    if state.phase is Phase.STORE:
        # backoff expired: probe again
        return state, [ProbeChannel(delay_us=probe_stagger(state.node_id, params, topology),
                                    lead=Wait.SLEEP)]
    if state.phase is Phase.SEND_WAKEUP:
        return _retry_transaction(state, params, topology)
    if state.phase is Phase.WAIT_R_ACK:
        if state.napping:
            gen = state.timer_gen + 1
            window = params.rack_window_us() - params.src_sleep_after_rreq_us
            return (replace(state, napping=False, timer_gen=gen),
                    [SetTimer(max(window, 1), gen, radio=Wait.DELAY)])
        return _trome_decide(state, params, topology)
    if state.phase is Phase.SEND_DATA:
        if state.packet_retries + 1 > params.retry_cap:
            return _give_up(state)
        state = replace(state, packet_retries=state.packet_retries + 1)
        return _trome_send_packet(state, params)
    if state.phase is Phase.RELAY_FWD:
        # next hop never answered: stop the chain, answer the source
        ack = frames.RoutingRequestAck(state.pending_ttl, 0, _free_slots(state, params))
        gen = state.timer_gen + 1
        return (replace(state, phase=Phase.RX_WAIT, timer_gen=gen),
                [SendFrame(state.rx_src,
                           _mac_data_with_routing(state.node_id, state.rx_src, ack),
                           delay_us=params.t_turn_us, lead=Wait.SLEEP),
                 SetTimer(params.data_wait_timeout_us, gen, radio=Wait.RX)])
    if state.phase is Phase.RX_WAIT:
        return replace(state, phase=Phase.SLEEP), [EnterSleep()]
    return _ignore(state, event)


_MACHINES = {}
