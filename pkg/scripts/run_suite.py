"""Run every statistical battery and print one line per check."""
import argparse
import sys

from lossless_release.suite import DEFAULT_SEED, run_suite


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=DEFAULT_SEED)
    ap.add_argument("--quick", action="store_true")
    args = ap.parse_args()
    results = run_suite(seed=args.seed, quick=args.quick, report=print)
    sys.exit(0 if all(r.passed for r in results) else 1)


if __name__ == "__main__":
    main()
