"""Command line: run, sweep, verify, compare.

Every subcommand exits 1 when an invariant or oracle check fails and 2 on
bad input.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import fields

from .. import analysis
from ..simnet import Trace
from .config import ConfigError, RunConfig, build_topology, coerce_values, load
from .runner import SweepError, format_table, gain_table, run, sweep, sweep_table


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config field (repeatable)")
    for f in fields(RunConfig):
        p.add_argument(f"--{f.name.replace('_', '-')}", dest=f"cfg_{f.name}", default=None,
                       help=f"config field {f.name}")


def _config(args) -> RunConfig:
    cfg = load(args.config) if args.config else RunConfig()
    kv = {}
    for item in args.set:
        k, sep, v = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        kv[k.strip()] = v
    for f in fields(RunConfig):
        v = getattr(args, f"cfg_{f.name}")
        if v is not None:
            kv[f.name] = v
    return cfg.with_(**kv) if kv else cfg


def _print_violations(res) -> None:
    for v in res.violations:
        print(f"INVARIANT  {v}")
    for v in res.d2_violations[:20]:
        print(f"D2         nodes {v.u},{v.v} colour {v.color} ({v.hops} hop) from t={v.start}")


def cmd_run(args) -> int:
    cfg = _config(args)
    res = run(cfg)
    if args.trace:
        with open(args.trace, "w") as fh:
            res.trace.to_csv(fh)
    if args.report:
        with open(args.report, "w") as fh:
            analysis.reports_to_csv([res.report], fh)
    print(analysis.summary_text(res.report))
    _print_violations(res)
    return 0 if res.ok else 1


def _parse_vary(items: list[str]) -> dict[str, list]:
    vary = {}
    for item in items:
        k, sep, v = item.partition("=")
        if not sep:
            raise ConfigError(f"--vary expects KEY=V1,V2,..., got {item!r}")
        k = k.strip()
        vary[k] = [coerce_values({k: x})[k] for x in v.split(",") if x.strip()]
    return vary


def cmd_sweep(args) -> int:
    cfg = _config(args)
    vary = _parse_vary(args.vary)
    try:
        rows = sweep(cfg, vary, seeds=args.seeds)
    except SweepError as exc:
        print(f"FAILED  {exc}")
        return 1
    table = sweep_table(rows)
    text = format_table(table)
    gains = gain_table(rows)
    if gains:
        text += "\n" + format_table(gains)
    print(text, end="")
    if args.out:
        with open(args.out, "w") as fh:
            w = csv.DictWriter(fh, fieldnames=list(table[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(table)
    return 0


def cmd_verify(args) -> int:
    with open(args.trace) as fh:
        trace = Trace.from_csv(fh)
    known = {f.name for f in fields(RunConfig)}
    cfg = RunConfig().with_(**{k: str(v) for k, v in trace.meta.items() if k in known})
    if args.topology:
        cfg = cfg.with_(topology=args.topology)
    topo = build_topology(cfg)
    bad = analysis.verify_d2_coloring(trace, topo)
    fan = analysis.fan_in(trace)
    for v in bad[:50]:
        print(f"D2  nodes {v.u},{v.v} colour {v.color} ({v.hops} hop) from t={v.start}")
    ok = not bad
    if trace.protocol == "harvest" and fan > cfg.concurrency:
        print(f"FAN-IN  {fan} packets in one period exceeds {cfg.concurrency}")
        ok = False
    print(f"{'OK' if ok else 'FAIL'}  {len(bad)} D-2 violations, max fan-in {fan}")
    return 0 if ok else 1


def _read_report(path: str) -> analysis.Report:
    with open(path) as fh:
        rows = analysis.reports_from_csv(fh.read())
    if len(rows) != 1:
        raise ConfigError(f"{path}: expected exactly one report row, got {len(rows)}")
    r = rows[0]

    def num(k, cast=int):
        return None if r[k] == "" else cast(r[k])

    return analysis.Report(
        protocol=r["protocol"], n=int(r["n"]), packets=int(r["packets"]), seed=num("seed"),
        topology=r["topology"], latency_ms=num("latency_ms"), delivered=int(r["delivered"]),
        delivery_ratio=float(r["delivery_ratio"]), data_tx=int(r["data_tx"]),
        control_tx=int(r["control_tx"]), broadcast_tx=int(r["broadcast_tx"]),
        convergence_samples=num("convergence_samples"), rate=num("rate", float),
        rate_unit=r["rate_unit"], max_fan_in=int(r["max_fan_in"]), avg_height=num("avg_height", float),
        diameter=num("diameter"), censored=r["censored"] == "True",
    )


def cmd_compare(args) -> int:
    h, s = _read_report(args.harvest), _read_report(args.straw)
    g = analysis.compare(h, s)
    gain = "undefined" if g.latency_gain is None else f"{100 * g.latency_gain:.2f}%"
    print(f"latency gain       {gain}")
    print(f"harvest rate       {analysis._fmt(g.harvest_rate)} {h.rate_unit}")
    print(f"straw rate         {analysis._fmt(g.straw_rate)} {s.rate_unit}")
    print(f"control tx delta   {g.control_delta}")
    print(f"broadcast delta    {g.broadcast_delta}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="harvestsim", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)
    p = sub.add_parser("run", help="one seeded run")
    _add_config_args(p)
    p.add_argument("--trace", help="write the trace CSV here")
    p.add_argument("--report", help="write the report CSV here")
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("sweep", help="cross product of parameters over seeds")
    _add_config_args(p)
    p.add_argument("--vary", action="append", default=[], metavar="KEY=V1,V2",
                   help="parameter values to sweep (repeatable)")
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--out", help="write the summary table CSV here")
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("verify", help="D-2 oracle and fan-in check over a trace CSV")
    p.add_argument("trace")
    p.add_argument("--topology", help="override the topology recorded in the trace")
    p.set_defaults(func=cmd_verify)
    p = sub.add_parser("compare", help="latency gain of a harvest report over a straw report")
    p.add_argument("harvest")
    p.add_argument("straw")
    p.set_defaults(func=cmd_compare)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
