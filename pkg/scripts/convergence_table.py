#!/usr/bin/env python3
"""First-node completion (in 30-period samples) against network size."""

import argparse

from harvestsim.harness import RunConfig, sweep
from harvestsim.harness.runner import format_table, sweep_table


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="6,12,18,22,31,42,51")
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--loss-model", default="distance-decay")
    args = ap.parse_args()
    base = RunConfig(protocol="harvest", loss_model=args.loss_model, spacing_ft=3.0, packets=100)
    rows = sweep(base, {"n": [int(x) for x in args.sizes.split(",")]}, seeds=args.seeds)
    table = [{k: r[k] for k in ("n", "convergence_samples", "delivery_ratio", "censored", "runs")}
             for r in sweep_table(rows)]
    table.sort(key=lambda r: r["n"])
    print(format_table(table), end="")


if __name__ == "__main__":
    main()
