"""Seeded execution of single runs and parameter sweeps."""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field, fields
from statistics import mean, pstdev

from .. import analysis
from ..harvest import HarvestNode, HarvestParams
from ..simnet import Kernel, Medium, Topology, Trace, mode_durations
from ..straw import StrawBase, StrawNode, StrawParams, static_routes
from .config import ConfigError, RunConfig, build_topology


@dataclass
class RunResult:
    config: RunConfig
    topology: Topology
    trace: Trace
    report: analysis.Report
    violations: list[str] = field(default_factory=list)
    d2_violations: list = field(default_factory=list)
    censored: bool = False
    medium: Medium | None = None
    nodes: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations and not self.d2_violations


def _rng(seed: int, role: str, i: int = 0) -> random.Random:
    return random.Random(f"{role}:{seed}:{i}")


def _meta(cfg: RunConfig) -> dict:
    meta = {f.name: int(v) if isinstance(v, bool) else v
            for f in fields(cfg) for v in [getattr(cfg, f.name)]}
    meta["base"] = 0
    return meta


def simulate(cfg: RunConfig, topo: Topology | None = None):
    """Build and run one simulation; returns (trace, medium, nodes, censored)."""
    topo = topo or build_topology(cfg)
    k = Kernel()
    trace = Trace(cfg.protocol, _meta(cfg))
    medium = Medium(k, topo, _rng(cfg.seed, "medium"), trace, airtime=cfg.airtime_ms)
    limit = cfg.timeout_periods * cfg.period_ms
    if cfg.protocol == "harvest":
        p = HarvestParams(colors=cfg.colors, concurrency=cfg.concurrency, slot_ms=cfg.slot_ms,
                          airtime_ms=cfg.airtime_ms, buffers=cfg.buffers, packets=cfg.packets,
                          soft_ttl_periods=cfg.soft_ttl_periods, duty_cycle=cfg.duty_cycle)
        nodes = [HarvestNode(i, p, medium, _rng(cfg.seed, "node", i)) for i in range(topo.n)]
        for nd in nodes:
            nd.start()
        finished = lambda: all(nd.done for nd in nodes[1:])
    else:
        p = StrawParams(slot_ms=cfg.slot_ms, airtime_ms=cfg.airtime_ms, packets=cfg.packets,
                        retry_cap=cfg.retry_cap)
        routes = static_routes(topo)
        base = StrawBase(p, medium, _rng(cfg.seed, "node", 0), routes)
        nodes = [base] + [StrawNode(i, p, medium, _rng(cfg.seed, "node", i), routes[i])
                          for i in range(1, topo.n)]
        base.start()
        finished = lambda: base.done
    k.run(until=limit, stop=finished)
    censored = not finished()
    medium.finish()
    trace.meta["censored"] = int(censored)
    return trace, medium, nodes, censored


def check_invariants(cfg: RunConfig, topo: Topology, trace: Trace, medium: Medium, nodes,
                     report: analysis.Report, censored: bool) -> list[str]:
    bad = []
    per, *_ = analysis.tx_counts(trace, topo.n)
    if per != medium.tx_count:
        bad.append("tx counts in the trace disagree with the medium's counters")
    modes = analysis.mode_timeline(trace, topo.n)
    for i, (m, d) in enumerate(zip(modes, mode_durations(medium))):
        if m["awake"] != d["idle"] + d["tx"] + d["rx"] or m["tx"] != d["tx"] or m["rx"] != d["rx"]:
            bad.append(f"node {i}: trace mode timeline disagrees with the medium")
            break
    generated = {(o, s) for o in range(1, topo.n) for s in range(cfg.packets)}
    got = analysis.base_receptions(trace)
    if not {(o, s) for _, o, s in got} <= generated:
        bad.append("base received a packet that was never generated")
    if cfg.protocol == "harvest":
        if len(got) != len({(o, s) for _, o, s in got}):
            bad.append("base received a duplicate packet")
        if report.max_fan_in > cfg.concurrency:
            bad.append(f"fan-in {report.max_fan_in} exceeds {cfg.concurrency} per period")
        for nd in nodes:
            if nd.max_children > cfg.concurrency:
                bad.append(f"node {nd.id} had {nd.max_children} children")
            if nd.max_buffered > cfg.buffers:
                bad.append(f"node {nd.id} buffered {nd.max_buffered} > {cfg.buffers} packets")
    lossless = all(q in (0, 100) for row in topo.link_quality for q in row)
    if lossless and not censored and report.delivered != cfg.n * cfg.packets:
        bad.append(f"lossless run delivered {report.delivered} of {cfg.n * cfg.packets}")
    return bad


def run(cfg: RunConfig, model: analysis.EnergyModel | None = None, verify: bool = True) -> RunResult:
    topo = build_topology(cfg)
    trace, medium, nodes, censored = simulate(cfg, topo)
    report = analysis.build_report(trace, topo, model)
    bad = check_invariants(cfg, topo, trace, medium, nodes, report, censored)
    d2 = analysis.verify_d2_coloring(trace, topo) if verify and cfg.protocol == "harvest" else []
    return RunResult(cfg, topo, trace, report, bad, d2, censored, medium, nodes)


# ---------------------------------------------------------------- sweeps

@dataclass
class SweepRow:
    key: dict
    results: list[RunResult]

    def stat(self, attr: str):
        vals = [getattr(r.report, attr) for r in self.results]
        vals = [v for v in vals if v is not None]
        if not vals:
            return None, None, len(self.results)
        return mean(vals), pstdev(vals), len(self.results) - len(vals)


class SweepError(RuntimeError):
    pass


def sweep(base: RunConfig, vary: dict[str, list] | None = None, seeds: int = 1,
          verify: bool = True) -> list[SweepRow]:
    """Cross product of ``vary`` times seeds 1..``seeds`` (offset from base.seed)."""
    vary = dict(vary or {})
    names = sorted(vary)
    rows = []
    for combo in itertools.product(*(vary[k] for k in names)) if names else [()]:
        key = dict(zip(names, combo))
        results = []
        for s in range(seeds):
            try:
                cfg = base.with_(**key, seed=base.seed + s)
                res = run(cfg, verify=verify)
            except (ConfigError, ValueError) as exc:
                raise SweepError(f"run failed for {key} seed={base.seed + s}: {exc}") from exc
            if not res.ok:
                raise SweepError(f"invariant violated for {key} seed={base.seed + s}: "
                                 f"{res.violations or res.d2_violations[:3]}")
            results.append(res)
        rows.append(SweepRow(key, results))
    rows.sort(key=lambda r: tuple(str(r.key[k]) for k in names))
    return rows


def _cell(m, sd) -> str:
    return "" if m is None else f"{m:.3f} +- {sd:.3f}"


def sweep_table(rows: list[SweepRow]) -> list[dict]:
    out = []
    for r in rows:
        d = dict(r.key)
        for attr in ("latency_ms", "rate", "convergence_samples", "delivery_ratio", "control_tx",
                     "broadcast_tx"):
            m, sd, missing = r.stat(attr)
            d[attr] = _cell(m, sd)
        d["censored"] = sum(res.censored for res in r.results)
        d["runs"] = len(r.results)
        out.append(d)
    return out


def gain_table(rows: list[SweepRow]) -> list[dict]:
    """Pair harvest and straw rows that agree on every other key; gain per seed."""
    by_rest: dict[tuple, dict[str, SweepRow]] = {}
    for r in rows:
        rest = tuple(sorted((k, str(v)) for k, v in r.key.items() if k != "protocol"))
        by_rest.setdefault(rest, {})[r.key.get("protocol", r.results[0].config.protocol)] = r
    out = []
    for rest, pair in sorted(by_rest.items()):
        if set(pair) != {"harvest", "straw"}:
            continue
        gains = []
        for h, s in zip(pair["harvest"].results, pair["straw"].results):
            g = analysis.compare(h.report, s.report).latency_gain
            if g is not None:
                gains.append(g)
        out.append(dict(rest, gain=_cell(mean(gains), pstdev(gains)) if gains else "",
                        runs=len(gains)))
    return out


def format_table(table: list[dict]) -> str:
    if not table:
        return "(empty)\n"
    cols = list(table[0])
    width = {c: max(len(c), *(len(str(r.get(c, ""))) for r in table)) for c in cols}
    lines = ["  ".join(c.ljust(width[c]) for c in cols)]
    for r in table:
        lines.append("  ".join(str(r.get(c, "")).ljust(width[c]) for c in cols))
    return "\n".join(lines) + "\n"
