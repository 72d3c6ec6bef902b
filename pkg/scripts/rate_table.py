#!/usr/bin/env python3
"""Collection rates and latency gain, lossless and on the 21-node lossy layout."""

import argparse
from statistics import mean, pstdev

from harvestsim import analysis
from harvestsim.harness import RunConfig, run


def pairs(cfg, seeds):
    return [(run(cfg.with_(protocol="harvest", seed=s)), run(cfg.with_(protocol="straw", seed=s)))
            for s in range(1, seeds + 1)]


def summary(name, ps):
    gains = [analysis.compare(h.report, s.report).latency_gain for h, s in ps]
    hr = [h.report.rate for h, _ in ps]
    sr = [s.report.rate for _, s in ps]
    print(f"{name:10s} harvest {mean(hr):.3f} +- {pstdev(hr):.3f} packets/4t_S   "
          f"straw {mean(sr):.3f} +- {pstdev(sr):.3f} packets/3t_S   "
          f"gain {100 * mean(gains):.2f}% +- {100 * pstdev(gains):.2f}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=10)
    args = ap.parse_args()
    summary("lossless", pairs(RunConfig(topology="grid:1x21@0,10", n=20), args.seeds))
    summary("lossy21", pairs(RunConfig(topology="lossy21", n=20, loss_model="lossy21"), args.seeds))


if __name__ == "__main__":
    main()
