"""Discrete-event kernel and radio/MAC model.

Virtual time is an integer count of milliseconds.  One ``Medium`` instance
owns every frame in flight, the per-node radio modes and the event trace;
protocol code only sees it through ``transmit``/``csma_send``/``set_mode``.
"""

from __future__ import annotations

import csv
import heapq
import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .linkest import CARRIER_MIN

SLOT_MS = 31
AIRTIME_MS = 23
MAX_FRAME_BYTES = 29
BROADCAST = 0xFF
BACKOFF_WINDOW = (1, 16)

SLEEP = "sleep"
IDLE = "idle"
RECEIVING = "rx"
TRANSMITTING = "tx"

TRACE_COLUMNS = ("time_ms", "node", "event", "peer", "color", "seq", "detail", "protocol")
TRACE_EVENTS = frozenset(
    {"tx", "rx", "collision", "drop", "sleep", "wake", "color_claim", "color_release"}
)


class SimulationError(RuntimeError):
    """A protocol broke a kernel or radio contract."""


# --------------------------------------------------------------------------
# kernel


@dataclass(order=True)
class Event:
    time: int
    order: int
    callback: Callable = field(compare=False)
    args: tuple = field(compare=False, default=())
    cancelled: bool = field(compare=False, default=False)


class Kernel:
    """Single-threaded event loop; equal timestamps fire in insertion order."""

    def __init__(self):
        self.now = 0
        self._queue: list[Event] = []
        self._counter = itertools.count()
        self.fired = 0

    def schedule(self, at: int, callback: Callable, *args) -> Event:
        if at < self.now:
            raise SimulationError(f"cannot schedule at {at}, now is {self.now}")
        ev = Event(int(at), next(self._counter), callback, args)
        heapq.heappush(self._queue, ev)
        return ev

    def after(self, delay: int, callback: Callable, *args) -> Event:
        return self.schedule(self.now + delay, callback, *args)

    @staticmethod
    def cancel(ev: Event | None) -> None:
        if ev is not None:
            ev.cancelled = True

    def pending(self) -> int:
        return sum(1 for ev in self._queue if not ev.cancelled)

    def step(self) -> bool:
        while self._queue:
            ev = heapq.heappop(self._queue)
            if ev.cancelled:
                continue
            self.now = ev.time
            self.fired += 1
            ev.callback(*ev.args)
            return True
        return False

    def run(self, until: int | None = None, stop: Callable[[], bool] | None = None) -> None:
        while self._queue:
            head = self._queue[0]
            if head.cancelled:
                heapq.heappop(self._queue)
                continue
            if until is not None and head.time > until:
                self.now = until
                return
            self.step()
            if stop is not None and stop():
                return
        if until is not None:
            self.now = max(self.now, until)


# --------------------------------------------------------------------------
# topology and frames


@dataclass
class Topology:
    """Node positions (feet) and a symmetric link-quality matrix in [0, 100].

    Node 0 is always the base station.
    """

    positions: list[tuple[float, float]]
    link_quality: list[list[int]]
    base_station_id: int = 0

    def __post_init__(self):
        n = len(self.positions)
        if n < 1:
            raise ValueError("topology needs at least one node")
        if len(self.link_quality) != n or any(len(row) != n for row in self.link_quality):
            raise ValueError("link_quality must be n x n")
        if self.base_station_id != 0:
            raise ValueError("the base station id is fixed at 0")
        for i in range(n):
            if self.link_quality[i][i] != 100:
                raise ValueError(f"link_quality[{i}][{i}] must be 100")
            for j in range(n):
                q = self.link_quality[i][j]
                if not 0 <= q <= 100:
                    raise ValueError(f"link quality {q} out of range")
                if q != self.link_quality[j][i]:
                    raise ValueError(f"asymmetric link {i}-{j}")
        self.audible: list[list[int]] = [
            [j for j in range(n) if j != i and self.link_quality[i][j] >= CARRIER_MIN]
            for i in range(n)
        ]

    @property
    def n(self) -> int:
        return len(self.positions)

    def q(self, i: int, j: int) -> int:
        return self.link_quality[i][j]

    def degree(self, threshold: int) -> int:
        return max(
            sum(1 for j in range(self.n) if j != i and self.link_quality[i][j] >= threshold)
            for i in range(self.n)
        )

    def hop_distances(self, source: int = 0, threshold: int = CARRIER_MIN) -> list[float]:
        """BFS hop counts over links of quality >= ``threshold``."""
        dist = [math.inf] * self.n
        dist[source] = 0
        frontier = [source]
        while frontier:
            nxt = []
            for u in frontier:
                for v in range(self.n):
                    if dist[v] == math.inf and v != u and self.link_quality[u][v] >= threshold:
                        dist[v] = dist[u] + 1
                        nxt.append(v)
            frontier = nxt
        return dist


@dataclass(eq=False)
class Frame:
    sender: int
    dest: int
    payload: bytes
    tx_start: int = 0
    tx_duration: int = AIRTIME_MS
    kind: str = "data"
    color: int | None = None
    seq: int | None = None
    detail: str = ""
    overlaps: list = field(default_factory=list, repr=False)
    decoded: object = field(default=None, repr=False)

    def __post_init__(self):
        if self.tx_duration <= 0:
            raise ValueError("tx_duration must be positive")
        if len(self.payload) > MAX_FRAME_BYTES:
            raise ValueError(f"frame payload {len(self.payload)} > {MAX_FRAME_BYTES} bytes")

    @property
    def tx_end(self) -> int:
        return self.tx_start + self.tx_duration


RX, COLLISION, LOST, MISSED, BUSY = "rx", "collision", "lost", "missed", "busy"


def delivery_outcomes(frame: Frame, topology: Topology, concurrent: Iterable[Frame], rng,
                      listening: Callable[[int], bool] | None = None) -> list[tuple[int, str]]:
    """Fate of ``frame`` at every node that can hear its carrier.

    ``concurrent`` holds the other frames whose airtime overlaps this one.
    Outcomes: rx, collision (another audible frame overlapped), busy (receiver
    was itself transmitting), missed (receiver asleep), lost (Bernoulli loss).
    Receivers are visited in id order so RNG consumption is reproducible.
    """
    concurrent = [f for f in concurrent if f is not frame]
    talkers = {f.sender for f in concurrent}
    out = []
    q = topology.link_quality
    for j in topology.audible[frame.sender]:
        if j in talkers:
            out.append((j, BUSY))
        elif any(q[f.sender][j] >= CARRIER_MIN for f in concurrent):
            out.append((j, COLLISION))
        elif listening is not None and not listening(j):
            out.append((j, MISSED))
        else:
            p = q[frame.sender][j]
            if p >= 100 or rng.random() < p / 100.0:
                out.append((j, RX))
            else:
                out.append((j, LOST))
    return out


def deliver(frame: Frame, topology: Topology, concurrent: Iterable[Frame], rng,
            listening: Callable[[int], bool] | None = None) -> list[tuple[int, Frame]]:
    """Receivers that decode ``frame`` given the overlapping ``concurrent`` set."""
    return [(j, frame) for j, fate in delivery_outcomes(frame, topology, concurrent, rng, listening)
            if fate == RX]


# --------------------------------------------------------------------------
# trace


class Trace:
    """Append-only event log; one row per radio or protocol event."""

    def __init__(self, protocol: str = "", meta: dict | None = None):
        self.protocol = protocol
        self.rows: list[tuple] = []
        self.meta: dict = dict(meta or {})

    def log(self, time, node, event, peer=None, color=None, seq=None, detail=""):
        self.rows.append((time, node, event, peer, color, seq, detail))

    def __len__(self):
        return len(self.rows)

    def where(self, event: str | None = None, node: int | None = None):
        for r in self.rows:
            if (event is None or r[2] == event) and (node is None or r[1] == node):
                yield r

    def to_csv(self, fh=None) -> str | None:
        buf = fh if fh is not None else io.StringIO()
        meta = dict(self.meta, protocol=self.protocol)
        buf.write("# " + " ".join(f"{k}={v}" for k, v in sorted(meta.items())) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in self.rows:
            w.writerow(["" if v is None else v for v in r] + [self.protocol])
        if fh is None:
            return buf.getvalue()
        return None

    @classmethod
    def from_csv(cls, fh) -> "Trace":
        text = fh.read() if hasattr(fh, "read") else str(fh)
        lines = text.splitlines()
        meta = {}
        while lines and lines[0].startswith("#"):
            for tok in lines.pop(0)[1:].split():
                k, _, v = tok.partition("=")
                meta[k] = _coerce(v)
        reader = csv.reader(lines)
        header = next(reader)
        if tuple(header[:7]) != TRACE_COLUMNS[:7]:
            raise ValueError(f"unexpected trace header {header}")
        protocol = str(meta.pop("protocol", ""))
        tr = cls(protocol=protocol, meta=meta)
        for row in reader:
            t, node, ev, peer, color, seq, detail = row[:7]
            if len(row) > 7 and row[7] and not tr.protocol:
                tr.protocol = row[7]
            tr.rows.append((int(t), int(node), ev, _opt_int(peer), _opt_int(color),
                            _opt_int(seq), detail))
        return tr


def _opt_int(s: str):
    return None if s == "" else int(s)


def _coerce(v: str):
    for cast in (int, float):
        try:
            return cast(v)
        except ValueError:
            pass
    return v


def parse_detail(detail: str) -> tuple[str, dict[str, str]]:
    kind, *rest = detail.split(";") if detail else ("",)
    kv = {}
    for tok in rest:
        k, _, v = tok.partition("=")
        kv[k] = v
    return kind, kv


# --------------------------------------------------------------------------
# medium


class Medium:
    """Shared channel: frames in flight, carrier sense, radio modes.

    Each node registers a handler whose ``on_frame(frame)`` is called at the
    end of every frame it decodes.
    """

    def __init__(self, kernel: Kernel, topology: Topology, rng, trace: Trace | None = None,
                 airtime: int = AIRTIME_MS, log_overheard: bool = True):
        self.k = kernel
        self.topo = topology
        self.rng = rng
        self.trace = trace if trace is not None else Trace()
        self.airtime = airtime
        self.log_overheard = log_overheard
        n = topology.n
        self.handlers: list = [None] * n
        self.mode = [IDLE] * n
        self.mode_since = [0] * n
        self.transmitting: list[Frame | None] = [None] * n
        self.in_flight: list[Frame] = []
        self.tx_count = [0] * n
        # accumulated mode durations, closed out by ``finish``
        self.awake_ms = [0] * n
        self.tx_ms = [0] * n
        self.rx_ms = [0] * n
        self.finished_at: int | None = None

    def attach(self, node: int, handler) -> None:
        self.handlers[node] = handler

    # -- modes

    def set_radio_mode(self, node: int, mode: str) -> None:
        if mode not in (SLEEP, IDLE):
            raise SimulationError(f"protocols may only request sleep/idle, not {mode!r}")
        if mode == self.mode[node]:
            return
        if mode == SLEEP and self.transmitting[node] is not None:
            raise SimulationError(f"node {node} cannot sleep mid-transmission")
        now = self.k.now
        if self.mode[node] == IDLE:
            self.awake_ms[node] += now - self.mode_since[node]
        self.mode[node] = mode
        self.mode_since[node] = now
        self.trace.log(now, node, "sleep" if mode == SLEEP else "wake")

    def asleep(self, node: int) -> bool:
        return self.mode[node] == SLEEP

    def _listening(self, start: int) -> Callable[[int], bool]:
        def ok(j: int) -> bool:
            return self.mode[j] == IDLE and self.mode_since[j] <= start
        return ok

    # -- carrier

    def carrier_sense(self, node: int) -> bool:
        """True (busy) iff an audible frame is in the air right now."""
        if self.mode[node] == SLEEP:
            raise SimulationError(f"node {node} sensed the channel while asleep")
        q = self.topo.link_quality
        now = self.k.now
        return any(f.sender != node and q[f.sender][node] >= CARRIER_MIN and f.tx_start <= now < f.tx_end
                   for f in self.in_flight)

    # -- transmission

    def transmit(self, frame: Frame) -> Frame:
        node = frame.sender
        now = self.k.now
        if self.mode[node] == SLEEP:
            raise SimulationError(f"node {node} transmitted while asleep")
        if self.transmitting[node] is not None:
            raise SimulationError(f"node {node} is already transmitting")
        frame.tx_start = now
        frame.tx_duration = frame.tx_duration or self.airtime
        for other in self.in_flight:
            if other.tx_end <= now:
                continue  # intervals are half-open: back-to-back frames do not overlap
            other.overlaps.append(frame)
            frame.overlaps.append(other)
        self.in_flight.append(frame)
        self.transmitting[node] = frame
        self.tx_count[node] += 1
        self.tx_ms[node] += frame.tx_duration
        self.trace.log(now, node, "tx", frame.dest, frame.color, frame.seq,
                       f"{frame.kind};dur={frame.tx_duration}{frame.detail}")
        self.k.schedule(frame.tx_end, self._end, frame)
        return frame

    def _end(self, frame: Frame) -> None:
        self.in_flight.remove(frame)
        self.transmitting[frame.sender] = None
        now = self.k.now
        fates = delivery_outcomes(frame, self.topo, frame.overlaps, self.rng,
                                  self._listening(frame.tx_start))
        log = self.trace.log
        for j, fate in fates:
            addressed = frame.dest == j or frame.dest == BROADCAST
            if fate == RX:
                self.rx_ms[j] += frame.tx_duration
                if addressed or self.log_overheard:
                    log(now, j, "rx", frame.sender, frame.color, frame.seq,
                        f"{frame.kind};dur={frame.tx_duration}{frame.detail}")
                h = self.handlers[j]
                if h is not None:
                    h.on_frame(frame)
            elif fate == COLLISION:
                log(now, j, "collision", frame.sender, frame.color, frame.seq, frame.kind)
                h = self.handlers[j]
                if h is not None and hasattr(h, "on_collision"):
                    h.on_collision(frame)
            elif frame.dest == j:
                log(now, j, "drop", frame.sender, frame.color, frame.seq, f"{frame.kind};{fate}")

    def csma_send(self, frame: Frame, on_start: Callable[[Frame], None] | None = None,
                  on_defer: Callable[[Frame], None] | None = None,
                  window: tuple[int, int] = BACKOFF_WINDOW, deadline: int | None = None,
                  backoff: bool = True) -> None:
        """Non-persistent CSMA: random wait, sense, send if idle else wait again.

        With ``deadline`` set, an attempt whose airtime would run past it is
        abandoned and ``on_defer`` fires instead.  ``backoff=False`` sends
        immediately without sensing.
        """
        node = frame.sender
        duration = frame.tx_duration or self.airtime

        def fire(f):
            self.transmit(f)
            if on_start is not None:
                on_start(f)

        if not backoff:
            if deadline is not None and self.k.now + duration > deadline:
                if on_defer is not None:
                    on_defer(frame)
                return
            fire(frame)
            return

        lo, hi = window

        def attempt():
            if self.mode[node] == SLEEP:
                if on_defer is not None:
                    on_defer(frame)
                return
            if self.k.now + duration > (deadline if deadline is not None else math.inf):
                if on_defer is not None:
                    on_defer(frame)
                return
            if self.carrier_sense(node) or self.transmitting[node] is not None:
                wait()
                return
            fire(frame)

        def wait():
            d = self.rng.randint(lo, hi)
            if deadline is not None and self.k.now + d + duration > deadline:
                if on_defer is not None:
                    on_defer(frame)
                return
            self.k.after(d, attempt)

        wait()

    def finish(self) -> None:
        """Close the mode timeline at the current time, or once frames still on air end."""
        now = max([self.k.now] + [f.tx_end for f in self.in_flight])
        for i in range(self.topo.n):
            if self.mode[i] == IDLE:
                self.awake_ms[i] += now - self.mode_since[i]
                self.mode_since[i] = now
        self.finished_at = now
        self.trace.meta["end_ms"] = now


def mode_durations(medium: Medium) -> list[dict[str, int]]:
    """Per-node milliseconds spent in each radio mode over [0, end]."""
    end = medium.finished_at if medium.finished_at is not None else medium.k.now
    out = []
    for i in range(medium.topo.n):
        awake = medium.awake_ms[i]
        tx, rx = medium.tx_ms[i], medium.rx_ms[i]
        out.append({SLEEP: end - awake, TRANSMITTING: tx, RECEIVING: rx, IDLE: awake - tx - rx})
    return out


def seeded_rng(seed: int):
    import random
    return random.Random(seed)


__all__: Sequence[str] = [
    "AIRTIME_MS", "BACKOFF_WINDOW", "BROADCAST", "Event", "Frame", "Kernel", "Medium",
    "SLOT_MS", "SimulationError", "Topology", "Trace", "deliver", "delivery_outcomes",
    "mode_durations", "parse_detail", "seeded_rng",
]
