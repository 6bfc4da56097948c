"""Compare the two first-crossing path samplers against brute-force paths.

For zero counts that first cross in round r, the exact sampler draws the
prefix sums from their joint conditional law; the sequential sampler
truncates each step on the past only.  Brute force simulates whole paths and
keeps the ones with the right crossing pattern.
"""
import argparse

import numpy as np
from scipy import stats

from lossless_release.histogram import sample_first_crossing


def brute_force(r, budgets, thresholds, n, rng):
    b = np.asarray(budgets[:r])
    cut = b * np.asarray(thresholds[:r])
    sd = np.sqrt(0.5 * np.diff(np.concatenate([[0.0], b])))
    out = []
    while sum(map(len, out)) < n:
        s = np.cumsum(rng.normal(0, 1, (2_000_000, r)) * sd, axis=1)
        ok = np.all(s[:, :-1] <= cut[:-1], axis=1) & (s[:, -1] > cut[-1])
        out.append(s[ok, -1])
    return np.concatenate(out)[:n]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=30_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    budgets, thresholds = [0.3, 1.0, 3.0], [3.0, 2.0, 1.5]
    for r in (2, 3):
        n = args.n if r == 2 else args.n // 10
        ref = brute_force(r, budgets, thresholds, n, rng)
        for path in ("exact", "sequential"):
            got = sample_first_crossing(r, budgets, thresholds, 1.0, n, rng, path=path)
            ks = stats.ks_2samp(ref, got)
            print(f"r={r} {path:<10s} mean {got.mean():.4f} vs {ref.mean():.4f}  KS p={ks.pvalue:.2e}")


if __name__ == "__main__":
    main()
