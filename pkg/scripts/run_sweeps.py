#!/usr/bin/env python3
"""Run every experiment over a small grid and print one summary line each.

Reports land in results/<experiment>_<class>_<size>.{csv,json}.
"""
import argparse
import sys
import time

from reggames.experiments import ExperimentConfig, run
from reggames.game import GameSize

GRID = [
    ("oddness", "identical", "2x2", 500),
    ("oddness", "identical", "2x3", 500),
    ("oddness", "identical", "3x3", 500),
    ("oddness", "general", "3x3", 500),
    ("regularity_rate", "identical", "3x3", 500),
    ("regularity_rate", "exact", "2x3", 500),
    ("regularity_rate", "weighted", "2x3", 200),
    ("regularity_rate", "weighted", "2x2x2", 50),
    ("equivalence_triangle", "weighted", "2x2x2", 50),
    ("potential_roundtrip", "weighted", "3x3", 100),
    ("rank_sweep", "identical", "3x3x3", 1000),
    ("lmatrix_sweep", "identical", "3x3x3", 1000),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--out", default="results")
    ap.add_argument("--scale", type=float, default=1.0, help="multiply sample counts")
    args = ap.parse_args()

    failed = 0
    for name, cls, size, samples in GRID:
        n = max(1, int(samples * args.scale))
        cfg = ExperimentConfig(name, cls, GameSize.parse(size), n, args.seed, output_path=f"{args.out}/{name}_{cls}_{size}")
        t = time.perf_counter()
        rep = run(cfg)
        agg = rep.aggregates
        keys = [k for k in ("odd_rate", "regular_rate", "disagreements", "rank_failures", "l_failures", "verdict_mismatches") if k in agg]
        stats = " ".join(f"{k}={agg[k]}" for k in keys)
        print(f"{'ok  ' if rep.passed else 'FAIL'} {name:22s} {cls:9s} {size:6s} n={n:<5d} {stats}  ({time.perf_counter() - t:.1f}s)")
        failed += not rep.passed
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
