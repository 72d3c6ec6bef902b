"""Trace-derived metrics, energy accounting and the D-2 colouring oracle.

Everything here reads only a trace (and, where hop distances matter, the
topology); nothing reaches into protocol objects.
"""

from __future__ import annotations

import csv
import io
import math
from bisect import bisect_left
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from statistics import mean

from .linkest import CARRIER_MIN, D1_MIN
from .simnet import Topology, Trace, parse_detail

PERIOD_MS = 124
SLOT_MS = 31
SAMPLE_PERIODS = 30


@dataclass(frozen=True)
class EnergyModel:
    """Currents in mA for each radio/CPU state."""
    idle_mA: float = 8.0
    rx_mA: float = 7.03
    tx_mA: float = 10.4
    eeprom_read_mA: float = 6.2
    eeprom_write_mA: float = 18.4
    # the currents come without operation times; one flash access is charged
    # for this long
    eeprom_op_ms: float = 1.0

    def __post_init__(self):
        for k, v in asdict(self).items():
            if v <= 0:
                raise ValueError(f"{k} must be positive")


# ---------------------------------------------------------------- trace views

def _kv(row) -> tuple[str, dict[str, str]]:
    return parse_detail(row[6] or "")


def base_id(trace: Trace) -> int:
    return int(trace.meta.get("base", 0))


def base_receptions(trace: Trace) -> list[tuple[int, int, int]]:
    """(time, origin, origin seq) of every data frame the base decoded for itself."""
    b = base_id(trace)
    out = []
    for r in trace.rows:
        if r[2] != "rx" or r[1] != b:
            continue
        kind, kv = _kv(r)
        if kind == "data" and kv.get("to") == str(b):
            out.append((r[0], int(kv["origin"]), int(kv["oseq"])))
    return out


def latency(trace: Trace) -> int | None:
    """Last minus first base-station data reception; None when nothing arrived."""
    rx = base_receptions(trace)
    if not rx:
        return None
    return rx[-1][0] - rx[0][0]


def per_period_counts(trace: Trace, period: int = PERIOD_MS) -> dict[int, int]:
    counts: dict[int, int] = defaultdict(int)
    for t, _, _ in base_receptions(trace):
        counts[t // period] += 1
    return dict(counts)


def fan_in(trace: Trace, period: int = PERIOD_MS) -> int:
    """Most data frames any node decoded as addressee within one period."""
    counts: dict[tuple[int, int], int] = defaultdict(int)
    for r in trace.rows:
        if r[2] != "rx":
            continue
        kind, kv = _kv(r)
        if kind == "data" and kv.get("to") == str(r[1]):
            counts[(r[1], r[0] // period)] += 1
    return max(counts.values(), default=0)


def steady_state_window(trace: Trace, period: int = PERIOD_MS, trim: int = 0) -> list[int]:
    """Per-period base reception counts from first to last reception.

    ``trim`` drops that many periods from each end (pipeline fill and drain).
    """
    counts = per_period_counts(trace, period)
    if not counts:
        return []
    lo, hi = min(counts), max(counts)
    seq = [counts.get(p, 0) for p in range(lo, hi + 1)]
    return seq[trim:len(seq) - trim] if trim else seq


def tx_counts(trace: Trace, n: int) -> tuple[list[int], int, int, int]:
    """Per-node tx counts plus totals of data, beacon and command frames."""
    per = [0] * n
    data = beacon = command = 0
    for r in trace.rows:
        if r[2] != "tx":
            continue
        per[r[1]] += 1
        kind = (r[6] or "").split(";", 1)[0]
        if kind == "data":
            data += 1
        elif kind == "beacon":
            beacon += 1
        elif kind == "command":
            command += 1
    return per, data, beacon, command


def broadcast_transmissions(trace: Trace, forwards_only: bool = True) -> int:
    """Frames sent for a dedicated control flood (command frames)."""
    n = 0
    for r in trace.rows:
        if r[2] != "tx":
            continue
        kind, kv = _kv(r)
        if kind == "command" and (not forwards_only or kv.get("forward") == "1"):
            n += 1
    return n


# ---------------------------------------------------------------- energy

def mode_timeline(trace: Trace, n: int, end: int | None = None) -> list[dict[str, int]]:
    """Milliseconds awake, transmitting and receiving per node.

    Nodes start awake at time 0; sleep/wake rows toggle the radio.  A wake
    without a sleep (or the reverse) is a broken timeline and raises.
    """
    if end is None:
        if "end_ms" not in trace.meta:
            raise ValueError("trace has no end_ms; the mode timeline is open-ended")
        end = int(trace.meta["end_ms"])
    awake_since: list[int | None] = [0] * n
    awake = [0] * n
    tx = [0] * n
    rx = [0] * n
    for r in trace.rows:
        t, node, ev = r[0], r[1], r[2]
        if t > end:
            raise ValueError(f"row at {t} after trace end {end}")
        if ev == "sleep":
            if awake_since[node] is None:
                raise ValueError(f"node {node} slept twice without waking (t={t})")
            awake[node] += t - awake_since[node]
            awake_since[node] = None
        elif ev == "wake":
            if awake_since[node] is not None:
                raise ValueError(f"node {node} woke while awake (t={t})")
            awake_since[node] = t
        elif ev in ("tx", "rx"):
            _, kv = _kv(r)
            if "dur" not in kv:
                raise ValueError(f"{ev} row without a duration at t={t}")
            (tx if ev == "tx" else rx)[node] += int(kv["dur"])
    for i in range(n):
        if awake_since[i] is not None:
            awake[i] += end - awake_since[i]
    out = []
    for i in range(n):
        idle = awake[i] - tx[i] - rx[i]
        if idle < 0:
            raise ValueError(f"node {i}: radio busy longer than awake")
        out.append({"awake": awake[i], "idle": idle, "tx": tx[i], "rx": rx[i], "sleep": end - awake[i]})
    return out


def eeprom_reads(trace: Trace, n: int) -> list[int]:
    """One flash read per own-payload data transmission."""
    reads = [0] * n
    for r in trace.rows:
        if r[2] != "tx":
            continue
        kind, kv = _kv(r)
        if kind == "data" and kv.get("origin") == str(r[1]):
            reads[r[1]] += 1
    return reads


def energy(trace: Trace, model: EnergyModel, n: int, end: int | None = None) -> list[float]:
    """Per-node energy in mA*ms: mode durations times currents plus flash reads."""
    modes = mode_timeline(trace, n, end)
    reads = eeprom_reads(trace, n)
    return [m["idle"] * model.idle_mA + m["rx"] * model.rx_mA + m["tx"] * model.tx_mA
            + reads[i] * model.eeprom_read_mA * model.eeprom_op_ms
            for i, m in enumerate(modes)]


# ---------------------------------------------------------------- D-2 oracle

@dataclass(frozen=True)
class Violation:
    u: int
    v: int
    color: int
    hops: int
    start: int
    first_tx: tuple[int, int]


@dataclass
class _Claim:
    node: int
    color: int
    start: int
    end: int


def _claims(trace: Trace, end: int) -> list[_Claim]:
    open_: dict[int, _Claim] = {}
    out = []
    for r in trace.rows:
        if r[2] == "color_claim":
            prev = open_.pop(r[1], None)
            if prev is not None:
                prev.end = r[0]
                out.append(prev)
            open_[r[1]] = _Claim(r[1], r[4], r[0], end)
        elif r[2] == "color_release":
            c = open_.pop(r[1], None)
            if c is not None:
                c.end = r[0]
                out.append(c)
    out.extend(open_.values())
    return out


def _within_two(topo: Topology, threshold: int = CARRIER_MIN) -> dict[tuple[int, int], int]:
    pairs = {}
    for u in range(topo.n):
        d = topo.hop_distances(u, threshold)
        for v in range(u + 1, topo.n):
            if d[v] <= 2:
                pairs[(u, v)] = int(d[v])
    return pairs


def verify_d2_coloring(trace: Trace, topology: Topology, relay_horizon: int = 3 * PERIOD_MS,
                       threshold: int = CARRIER_MIN) -> list[Violation]:
    """Brute-force check that no two nodes within two hops share a colour.

    Two nodes may briefly hold the same colour while their frames keep
    colliding and neither knows of the other; that is how contention
    resolves.  A pair is a violation when both transmit in the colour again
    after either

    * each claim has gone out in a collision-free frame (no receiver logged a
      collision for it) sent as an established holder, not flagged
      ``contend``, or
    * each node has learned of the other's claim: v learns of u's claim when
      it decodes one of u's frames in that colour, or decodes a frame from a
      common neighbour w sent within ``relay_horizon`` after w decoded such a
      frame from u.
    """
    end = int(trace.meta.get("end_ms", trace.rows[-1][0] if trace.rows else 0))
    claims = _claims(trace, end + 1)
    by_node: dict[int, list[_Claim]] = defaultdict(list)
    for c in claims:
        by_node[c.node].append(c)
    # tx starts by (sender, colour); decode times by (receiver, sender, colour)
    # and by (receiver, sender); who decoded each (sender, colour)
    sent: dict[tuple[int, int], list[int]] = defaultdict(list)
    by_rsc: dict[tuple[int, int, int], list[int]] = defaultdict(list)
    by_rs: dict[tuple[int, int], list[int]] = defaultdict(list)
    hearers: dict[tuple[int, int], set[int]] = defaultdict(set)
    collided = {(r[3], r[0]) for r in trace.rows if r[2] == "collision"}  # (sender, tx end)
    clean: dict[tuple[int, int], list[int]] = defaultdict(list)
    for r in trace.rows:
        if r[2] == "tx" and r[4] is not None:
            sent[(r[1], r[4])].append(r[0])
            kv = _kv(r)[1]
            dur = kv.get("dur")
            if dur is not None and "contend" not in kv and (r[1], r[0] + int(dur)) not in collided:
                clean[(r[1], r[4])].append(r[0])
        elif r[2] == "rx" and r[4] is not None and r[3] is not None:
            by_rsc[(r[1], r[3], r[4])].append(r[0])
            by_rs[(r[1], r[3])].append(r[0])
            hearers[(r[3], r[4])].add(r[1])

    def first_in(times: list[int], lo: int, hi: int) -> int | None:
        i = bisect_left(times, lo)
        return times[i] if i < len(times) and times[i] < hi else None

    def learned(u: _Claim, v: _Claim, lo: int, hi: int) -> int | None:
        """Earliest time in [lo, hi) at which v.node knew of claim u."""
        best = first_in(by_rsc.get((v.node, u.node, u.color), []), lo, hi)
        for w in sorted(hearers.get((u.node, u.color), ())):
            if w == v.node:
                continue
            t1s = by_rsc[(w, u.node, u.color)]
            top = hi if best is None else best
            t2s = by_rs.get((v.node, w), [])
            i = bisect_left(t2s, lo)
            while i < len(t2s) and t2s[i] < top:
                t2 = t2s[i]
                j = bisect_left(t1s, t2) - 1
                if j >= 0 and t1s[j] >= u.start and t2 - t1s[j] <= relay_horizon:
                    best = t2
                    break
                i += 1
        return best

    out = []
    for (a, b), h in sorted(_within_two(topology, threshold).items()):
        for cu in by_node.get(a, ()):
            for cv in by_node.get(b, ()):
                if cu.color != cv.color:
                    continue
                lo, hi = max(cu.start, cv.start), min(cu.end, cv.end)
                if lo >= hi:
                    continue
                marks = []
                ca = first_in(clean.get((a, cu.color), []), cu.start, hi)
                cb = first_in(clean.get((b, cv.color), []), cv.start, hi)
                if ca is not None and cb is not None:
                    marks.append(max(ca, cb))
                l_uv = learned(cu, cv, lo, hi)
                l_vu = learned(cv, cu, lo, hi)
                if l_uv is not None and l_vu is not None:
                    marks.append(max(l_uv, l_vu))
                if not marks:
                    continue
                both = min(marks)
                ta = first_in(sent.get((a, cu.color), []), both + 1, hi)
                tb = first_in(sent.get((b, cv.color), []), both + 1, hi)
                if ta is not None and tb is not None:
                    out.append(Violation(a, b, cu.color, h, lo, (ta, tb)))
    return out


# ---------------------------------------------------------------- convergence

def first_completion(trace: Trace) -> tuple[int, int] | None:
    """(time, node) of the earliest transmission of a node's last own packet."""
    for r in trace.rows:
        if r[2] == "tx":
            _, kv = _kv(r)
            if kv.get("last") == "1":
                return r[0], r[1]
    return None


def convergence_samples(trace: Trace, sample_period: int = SAMPLE_PERIODS * PERIOD_MS) -> int | None:
    """Sampling periods (of ``sample_period`` ms) until the first node has sent all its packets.

    Counted from the first non-base colour claim.  Returns 0 when nodes had
    nothing to send and None (censored) when no node finished.
    """
    if int(trace.meta.get("packets", 1)) == 0:
        return 0
    done = first_completion(trace)
    if done is None:
        return None
    b = base_id(trace)
    start = next((r[0] for r in trace.rows if r[2] == "color_claim" and r[1] != b), 0)
    return max(1, math.ceil((done[0] - start + 1) / sample_period))


# ---------------------------------------------------------------- rates

def harvest_rate(trace: Trace, period: int = PERIOD_MS) -> float | None:
    """Base-station receptions per period over the whole collection."""
    lat = latency(trace)
    if not lat:
        return None
    return len(base_receptions(trace)) / (lat / period)


def straw_stream_rate(trace: Trace, min_hops: int = 3) -> float | None:
    """Packets reaching the base per packet sent by targets at >= ``min_hops``.

    A target that far out sends one packet every three slots, so this is the
    rate in packets per 3 slots.
    """
    sent: dict[tuple[int, int], int] = defaultdict(int)
    hops: dict[int, int] = {}
    for r in trace.rows:
        if r[2] != "tx":
            continue
        kind, kv = _kv(r)
        if kind == "data" and kv.get("origin") == str(r[1]):
            sent[(r[1], int(kv["session"]))] += 1
            hops[r[1]] = int(kv["hops"])
    got: dict[tuple[int, int], int] = defaultdict(int)
    b = base_id(trace)
    for r in trace.rows:
        if r[2] == "rx" and r[1] == b:
            kind, kv = _kv(r)
            if kind == "data" and kv.get("to") == str(b):
                got[(int(kv["origin"]), int(kv["session"]))] += 1
    keys = [k for k in sent if hops[k[0]] >= min_hops]
    total = sum(sent[k] for k in keys)
    if not total:
        return None
    return sum(got[k] for k in keys) / total


def tree_heights(trace: Trace) -> dict[int, int]:
    """Hop count of each node's last claim (Harvest) or data route (Straw)."""
    h: dict[int, int] = {}
    b = base_id(trace)
    for r in trace.rows:
        if r[1] == b:
            continue
        kind, kv = _kv(r)
        if r[2] == "color_claim" and kind.startswith("hops="):
            h[r[1]] = int(kind.split("=", 1)[1])
        elif r[2] == "tx" and kind == "data" and "hops" in kv and kv.get("origin") == str(r[1]):
            h[r[1]] = int(kv["hops"])
    return h


# ---------------------------------------------------------------- reports

@dataclass
class Report:
    protocol: str
    n: int
    packets: int
    seed: int | None
    topology: str
    latency_ms: int | None
    delivered: int
    delivery_ratio: float
    data_tx: int
    control_tx: int
    broadcast_tx: int
    tx_per_node: list[int] = field(default_factory=list)
    energy_per_node: list[float] = field(default_factory=list)
    convergence_samples: int | None = None
    rate: float | None = None
    rate_unit: str = ""
    max_fan_in: int = 0
    avg_height: float | None = None
    diameter: int | None = None
    censored: bool = False

    def __post_init__(self):
        if not 0.0 <= self.delivery_ratio <= 1.0:
            raise ValueError(f"delivery ratio {self.delivery_ratio} outside [0, 1]")

    @property
    def total_energy(self) -> float:
        return sum(self.energy_per_node)

    @property
    def mean_energy(self) -> float:
        e = self.energy_per_node[1:] or self.energy_per_node
        return mean(e) if e else 0.0


SCALAR_FIELDS = ("protocol", "n", "packets", "seed", "topology", "latency_ms", "delivered",
                 "delivery_ratio", "data_tx", "control_tx", "broadcast_tx", "convergence_samples",
                 "rate", "rate_unit", "max_fan_in", "avg_height", "diameter", "censored")


def diameter(topo: Topology, threshold: int = D1_MIN) -> int | None:
    worst = 0
    for u in range(topo.n):
        d = max(topo.hop_distances(u, threshold))
        if d == math.inf:
            return None
        worst = max(worst, int(d))
    return worst


def build_report(trace: Trace, topology: Topology, model: EnergyModel | None = None) -> Report:
    model = model or EnergyModel()
    n = topology.n
    meta = trace.meta
    packets = int(meta.get("packets", 0))
    senders = n - 1
    rx = base_receptions(trace)
    unique = len({(o, s) for _, o, s in rx})
    generated = senders * packets
    per, data, beacon, command = tx_counts(trace, n)
    heights = tree_heights(trace)
    proto = trace.protocol
    if proto == "straw":
        rate, unit = straw_stream_rate(trace), "packets/3t_S"
        conv = None
    else:
        rate, unit = harvest_rate(trace), "packets/4t_S"
        conv = convergence_samples(trace)
    return Report(
        protocol=proto, n=senders, packets=packets, seed=meta.get("seed"),
        topology=str(meta.get("topology", "")), latency_ms=latency(trace), delivered=unique,
        delivery_ratio=unique / generated if generated else 1.0,
        data_tx=data, control_tx=beacon + command, broadcast_tx=broadcast_transmissions(trace),
        tx_per_node=per, energy_per_node=energy(trace, model, n), convergence_samples=conv,
        rate=rate, rate_unit=unit, max_fan_in=fan_in(trace),
        avg_height=mean(heights.values()) if heights else None, diameter=diameter(topology),
        censored=bool(meta.get("censored", False)),
    )


@dataclass(frozen=True)
class Gain:
    latency_gain: float | None
    harvest_rate: float | None
    straw_rate: float | None
    control_delta: int
    broadcast_delta: int


def compare(report_h: Report, report_s: Report) -> Gain:
    """Latency gain of the first report over the second, plus rate and control deltas."""
    for k in ("n", "packets", "topology"):
        if getattr(report_h, k) != getattr(report_s, k):
            raise ValueError(f"reports differ in {k}: {getattr(report_h, k)!r} vs {getattr(report_s, k)!r}")
    lh, ls = report_h.latency_ms, report_s.latency_ms
    gain = None if not ls or lh is None else (ls - lh) / ls
    return Gain(gain, report_h.rate, report_s.rate, report_s.control_tx - report_h.control_tx,
                report_s.broadcast_tx - report_h.broadcast_tx)


def reports_to_csv(reports, fh=None) -> str | None:
    buf = fh if fh is not None else io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCALAR_FIELDS + ("mean_energy_mAms",))
    for r in reports:
        w.writerow([_fmt(getattr(r, k)) for k in SCALAR_FIELDS] + [_fmt(r.mean_energy)])
    return buf.getvalue() if fh is None else None


def reports_from_csv(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def summary_text(r: Report) -> str:
    lines = [
        f"protocol      {r.protocol}",
        f"topology      {r.topology} (n={r.n}, M={r.packets}, seed={r.seed})",
        f"latency       {r.latency_ms} ms",
        f"delivered     {r.delivered} ({r.delivery_ratio:.3f})",
        f"rate          {_fmt(r.rate)} {r.rate_unit}",
        f"tx            data={r.data_tx} control={r.control_tx} broadcast={r.broadcast_tx}",
        f"fan-in        {r.max_fan_in} per period",
        f"energy        mean {r.mean_energy:.1f} mA*ms per node",
    ]
    if r.convergence_samples is not None:
        lines.append(f"convergence   {r.convergence_samples} samples of 30 periods")
    if r.censored:
        lines.append("CENSORED      run hit the timeout")
    return "\n".join(lines)
