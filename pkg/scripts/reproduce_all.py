"""Run every registered experiment and print one verdict line each."""

import argparse
import sys
from pathlib import Path

from covoter.experiments import REGISTRY, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out", help="parent output directory")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("names", nargs="*", help="subset of experiments (default: all)")
    args = ap.parse_args()
    failed = 0
    for name in args.names or REGISTRY:
        v = run_experiment(name, {"seed": args.seed}, Path(args.out) / name)
        failed += not v.passed
        print(f"{'PASS' if v.passed else 'FAIL'} {name:17s} {v.metric} = {v.value:.4g} ({v.comparison} {v.threshold:g}) [{v.runtime_s:.1f}s]")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
