#!/usr/bin/env python3
"""Broadcast cost of the baseline against Harvest's piggybacked control."""

import argparse

from harvestsim import analysis
from harvestsim.harness import RunConfig, run


def sessions(trace):
    return len({analysis._kv(r)[1]["session"] for r in trace.rows
                if r[2] == "tx" and r[1] == 0 and (r[6] or "").startswith("command")})


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=5)
    args = ap.parse_args()
    for label, cfg in (("lossless line", RunConfig(topology="grid:1x21@0,10", n=20)),
                       ("lossy21", RunConfig(topology="lossy21", n=20, loss_model="lossy21"))):
        for s in range(1, args.seeds + 1):
            h = run(cfg.with_(protocol="harvest", seed=s)).report
            st = run(cfg.with_(protocol="straw", seed=s))
            print(f"{label:14s} seed {s}  straw broadcasts {st.report.broadcast_tx:4d} in "
                  f"{sessions(st.trace):3d} sessions   harvest beacons {h.control_tx:5d}, "
                  f"dedicated control {h.broadcast_tx}")


if __name__ == "__main__":
    main()
