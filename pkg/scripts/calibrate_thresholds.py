"""Spread of the figure-experiment metrics over seeds, used to pick their thresholds."""

import argparse
import tempfile

import numpy as np

from covoter.experiments import run_experiment

DEFAULT = ["fig1", "fig3", "fig5", "fig6", "fig7", "fig8", "fig9", "beta-m2", "beta-m3"]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("names", nargs="*")
    args = ap.parse_args()
    with tempfile.TemporaryDirectory() as tmp:
        for name in args.names or DEFAULT:
            vals = [run_experiment(name, {"seed": s}, f"{tmp}/{name}{s}") for s in range(args.seeds)]
            x = np.array([v.value for v in vals])
            print(f"{name:9s} threshold {vals[0].threshold:<6g} min {x.min():.4g} median {np.median(x):.4g} "
                  f"max {x.max():.4g} pass {sum(v.passed for v in vals)}/{len(vals)}")


if __name__ == "__main__":
    main()
