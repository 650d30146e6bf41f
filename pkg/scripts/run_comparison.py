#!/usr/bin/env python3
"""Method-comparison experiment on the performance benchmark.

Runs the five methods over a seed grid at the benchmark scale and writes
compare.csv (per-cell parameter gap, policy gap, rollout reward, wall clock,
plus mean/sd rows per method).
"""
import argparse
import sys

from sblq.cli import main as sblq_main


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results/comparison")
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()
    return sblq_main([
        "compare", "--preset", "a1-performance",
        "--seed", str(args.seed), "--seeds", str(args.seeds),
        "--jobs", str(args.jobs), "--out", args.out,
    ])


if __name__ == "__main__":
    sys.exit(main())
