"""Lossless versus independent gradual release: per-rho noise variance.

    python3 scripts/run_fig2.py --reps 1000000 --grid-log 0.001:5:20 --seed 7 --out fig2.csv
"""
import argparse
import sys

from lossless_release.experiment import ExperimentConfig, parse_grid_spec, run_fig2


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=1_000_000)
    ap.add_argument("--grid-log", default="0.001:5:20")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out")
    args = ap.parse_args()
    text = run_fig2(ExperimentConfig(parse_grid_spec(args.grid_log), args.reps, args.seed))
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


if __name__ == "__main__":
    main()
