"""Straw: one node at a time streams its data up a fixed route.

The base station walks the targets in id order.  Each session starts with
a command flood (every node forwards a new command once); the target then
sends its requested packets every ``collection_period(hops)`` and each relay
forwards a packet one slot after it arrives.  Gaps found at the base are
asked for again by a recovery session naming the missing seqs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..linkest import D1_MIN, NeighborTable
from ..simnet import BROADCAST, Frame, Medium, Topology
from ..harvest.rules import select_parent
from .codec import (MAX_SPAN, StrawCommand, StrawDataFrame, decode, encode_command,
                    encode_data)


@dataclass
class StrawParams:
    slot_ms: int = 31
    airtime_ms: int = 23
    packets: int = 100
    retry_cap: int = 5
    jitter_ms: tuple[int, int] = (1, 124)
    backoff_min: int = 1
    backoff_max: int = 16
    # wait before streaming; None means two hops' worth of flood time, so the
    # command has cleared the target's interference range
    guard_ms: int | None = None
    start_slack_ms: int = 300

    def __post_init__(self):
        if self.airtime_ms > self.slot_ms:
            raise ValueError("a slot must fit one frame")
        if self.retry_cap < 0 or self.packets < 0:
            raise ValueError("retry_cap and packets must be non-negative")
        lo, hi = self.jitter_ms
        if not 0 <= lo <= hi:
            raise ValueError("jitter window must be 0 <= lo <= hi")
        if self.guard_ms is None:
            self.guard_ms = 2 * self.flood_hop_ms
        if self.guard_ms < 0:
            raise ValueError("guard_ms must be non-negative")

    @property
    def flood_hop_ms(self) -> int:
        """Worst case for one flood hop: jitter, two backoffs, one airtime."""
        return self.jitter_ms[1] + 2 * self.backoff_max + self.airtime_ms


def collection_period(hops: int) -> int:
    """Sending period of a target, in slots: 1, 2, then 3 from three hops out."""
    if hops < 1:
        raise ValueError("the base station is never a collection target")
    return min(hops, 3)


@dataclass
class Route:
    parent: int | None
    hops: int | None


def static_routes(topo: Topology) -> list[Route]:
    """Least-hop parents over the fixed D-1 link qualities."""
    hops = topo.hop_distances(topo.base_station_id, D1_MIN)
    routes = []
    for i in range(topo.n):
        if i == topo.base_station_id:
            routes.append(Route(None, 0))
            continue
        table = NeighborTable()
        for j in range(topo.n):
            if j != i and topo.q(i, j) > 0 and hops[j] != float("inf"):
                table.set_quality(j, topo.q(i, j), hops=int(hops[j]))
        parent = select_parent(table)
        routes.append(Route(parent, None if parent is None else int(hops[i])))
    return routes


class StrawNode:
    def __init__(self, nid: int, params: StrawParams, medium: Medium, rng, route: Route):
        self.id = nid
        self.p = params
        self.medium = medium
        self.k = medium.k
        self.rng = rng
        self.route = route
        self.seen_sessions: set[int] = set()
        self.forwarding = False
        self.sends: list = []
        self.forwards = 0
        medium.attach(nid, self)

    def on_frame(self, frame: Frame) -> None:
        msg = frame.decoded
        if msg is None:
            msg = frame.decoded = decode(frame.payload)
        if isinstance(msg, StrawCommand):
            self._command(msg)
        elif msg.dest == self.id and self.route.parent is not None:
            self._relay(frame, msg)

    # -- broadcast phase

    def _command(self, cmd: StrawCommand) -> None:
        if cmd.session in self.seen_sessions:
            return
        self.seen_sessions.add(cmd.session)
        lo, hi = self.p.jitter_ms
        self.k.after(self.rng.randint(lo, hi), self._forward_command, cmd)
        if cmd.target == self.id:
            self._collect(cmd)

    def _forward_command(self, cmd: StrawCommand) -> None:
        frame = Frame(self.id, BROADCAST, encode_command(cmd), tx_duration=self.p.airtime_ms,
                      kind="command", seq=cmd.session,
                      detail=f";session={cmd.session};target={cmd.target};forward=1")
        frame.decoded = cmd
        self.forwards += 1
        self.medium.csma_send(frame, window=(self.p.backoff_min, self.p.backoff_max))

    # -- collection phase

    def _collect(self, cmd: StrawCommand) -> None:
        for ev in self.sends:
            self.k.cancel(ev)
        self.sends = []
        if self.route.parent is None:
            return
        seqs = list(cmd.missing_seqs) if cmd.missing_seqs else list(range(self.p.packets))
        slot = self.p.slot_ms
        t0 = -(-(self.k.now + self.p.guard_ms) // slot) * slot
        period = collection_period(self.route.hops) * slot
        for i, s in enumerate(seqs):
            data = StrawDataFrame(self.id, s, cmd.session, self.route.parent, min(self.route.hops, 0xFF))
            self.sends.append(self.k.schedule(t0 + i * period, self._send, data))

    def _send(self, data: StrawDataFrame) -> None:
        frame = Frame(self.id, data.dest, encode_data(data), tx_duration=self.p.airtime_ms,
                      kind="data", seq=data.seq,
                      detail=f";to={data.dest};origin={data.origin};oseq={data.seq};session={data.session}"
                             f";hops={data.hops}")
        frame.decoded = data
        if self.medium.transmitting[self.id] is not None:
            self.medium.trace.log(self.k.now, self.id, "drop", data.origin, None, data.seq, "data;tx_busy")
            return
        self.medium.csma_send(frame, backoff=False)

    def _relay(self, frame: Frame, msg: StrawDataFrame) -> None:
        self.forwarding = True
        up = StrawDataFrame(msg.origin, msg.seq, msg.session, self.route.parent, msg.hops, msg.payload)
        self.k.schedule(frame.tx_start + self.p.slot_ms, self._send, up)


@dataclass
class Session:
    number: int
    target: int
    expected: list[int]
    started: int
    missing: tuple[int, ...] = ()
    got: set[int] = field(default_factory=set)
    first_rx: int | None = None
    last_rx: int | None = None


class StrawBase:
    """Base station: drives sessions and collects data."""

    def __init__(self, params: StrawParams, medium: Medium, rng, routes: list[Route],
                 targets: list[int] | None = None):
        self.id = medium.topo.base_station_id
        self.p = params
        self.medium = medium
        self.k = medium.k
        self.rng = rng
        self.routes = routes
        if targets is None:
            targets = [i for i, r in enumerate(routes) if i != self.id and r.parent is not None]
        self.targets = list(targets)
        self.unreachable = [i for i, r in enumerate(routes) if i != self.id and r.parent is None]
        self.received: list[tuple[int, int]] = []
        self.have: dict[int, set[int]] = {t: set() for t in self.targets}
        self.sessions: list[Session] = []
        self.per_target: dict[int, int] = {t: 0 for t in self.targets}
        self.shortfall: dict[int, int] = {}
        self.current: Session | None = None
        self.timer = None
        self.idx = 0
        self.done = False
        self.session_no = 0
        medium.attach(self.id, self)

    def start(self) -> None:
        self._next_target()

    def _next_target(self) -> None:
        if self.idx >= len(self.targets):
            self.current = None
            self.done = True
            return
        t = self.targets[self.idx]
        self.idx += 1
        if self.p.packets == 0:
            self._next_target()
            return
        self._open(t, list(range(self.p.packets)), ())

    def _open(self, target: int, expected: list[int], missing: tuple[int, ...]) -> None:
        self.session_no += 1
        self.per_target[target] += 1
        s = Session(self.session_no, target, expected, self.k.now, missing)
        self.sessions.append(s)
        self.current = s
        cmd = StrawCommand(target, missing, self.session_no)
        frame = Frame(self.id, BROADCAST, encode_command(cmd), tx_duration=self.p.airtime_ms,
                      kind="command", seq=self.session_no,
                      detail=f";session={self.session_no};target={target};missing={len(missing)};forward=0")
        frame.decoded = cmd
        self.medium.csma_send(frame, window=(self.p.backoff_min, self.p.backoff_max))
        self._arm(self.start_timeout(target))

    def start_timeout(self, target: int) -> int:
        """Longest plausible wait for the first packet: flood out, guard, data back."""
        p = self.p
        h = self.routes[target].hops
        return p.guard_ms + h * (p.flood_hop_ms + p.slot_ms) + p.start_slack_ms

    def _arm(self, delay: int) -> None:
        self.k.cancel(self.timer)
        self.timer = self.k.after(delay, self._close)

    def on_frame(self, frame: Frame) -> None:
        msg = frame.decoded
        if msg is None:
            msg = frame.decoded = decode(frame.payload)
        if not isinstance(msg, StrawDataFrame) or msg.dest != self.id:
            return
        s = self.current
        if msg.origin in self.have and msg.seq not in self.have[msg.origin]:
            self.have[msg.origin].add(msg.seq)
            self.received.append((msg.origin, msg.seq))
        if s is None or msg.origin != s.target or (msg.session != s.number & 0xFF):
            return
        now = self.k.now
        s.got.add(msg.seq)
        s.first_rx = now if s.first_rx is None else s.first_rx
        s.last_rx = now
        if s.got.issuperset(s.expected):
            self._arm(0)
            return
        # packets still due after this one, plus the pipeline depth as slack
        left = len(s.expected) - 1 - s.expected.index(msg.seq) if msg.seq in s.expected else 0
        period = collection_period(max(msg.hops, 1)) * self.p.slot_ms
        self._arm((left + 2) * period + (msg.hops + 1) * self.p.slot_ms)

    def _close(self) -> None:
        self.timer = None
        s = self.current
        missing = [q for q in range(self.p.packets) if q not in self.have[s.target]]
        if missing and self.per_target[s.target] <= self.p.retry_cap:
            if not s.got:
                # nothing came back: the flood probably missed the target, so
                # repeat the same request rather than shrinking it
                self._open(s.target, s.expected, s.missing)
                return
            ask = tuple(q for q in missing if q - missing[0] < MAX_SPAN)
            self._open(s.target, list(ask), ask)
            return
        if missing:
            self.shortfall[s.target] = len(missing)
        self._next_target()
