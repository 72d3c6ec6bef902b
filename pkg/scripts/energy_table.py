#!/usr/bin/env python3
"""Per-node energy with and without radio duty cycling."""

import argparse

from harvestsim.harness import RunConfig, run


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=20)
    ap.add_argument("--seeds", type=int, default=3)
    args = ap.parse_args()
    for s in range(1, args.seeds + 1):
        cfg = RunConfig(protocol="harvest", loss_model="distance-decay", n=args.n, seed=s)
        on, off = run(cfg).report, run(cfg.with_(duty_cycle=False)).report
        st = run(cfg.with_(protocol="straw")).report
        print(f"seed {s}  harvest duty-cycled {on.mean_energy / 1000:8.1f} mA*s/node   always on "
              f"{off.mean_energy / 1000:8.1f}   straw {st.mean_energy / 1000:8.1f}")


if __name__ == "__main__":
    main()
