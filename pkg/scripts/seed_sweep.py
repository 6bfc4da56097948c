"""How often does a correct build fail some battery by chance?

Runs the quick suite over many seeds and tallies failures per check.  With
family-wise alpha 0.01 per battery and 13 batteries, about 10% of seeds
should show one failure, spread over unrelated checks.
"""
import argparse
from collections import Counter

from lossless_release.suite import run_suite


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=60)
    args = ap.parse_args()
    tally, any_fail = Counter(), 0
    for seed in range(args.seeds):
        failed = [r.name for r in run_suite(seed=seed, quick=True) if not r.passed]
        any_fail += bool(failed)
        tally.update(failed)
    print(f"seeds with a failure: {any_fail}/{args.seeds}")
    for name, n in tally.most_common():
        print(f"  {n:3d}  {name}")


if __name__ == "__main__":
    main()
