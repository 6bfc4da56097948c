"""Brute-force reference computations.

These deliberately avoid the code paths they are used to check: joint
simulation plus rejection instead of closed-form conditionals, exact
enumeration instead of the binomial shortcut, quadrature instead of the
closed-form convolution, and plain Monte Carlo instead of grid propagation.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import integrate


def laplace_conv_quadrature(b1, b2, t):
    """Density of Lap(0, b1) + Lap(0, b2) at t by numerical integration."""
    f = lambda x: math.exp(-abs(x) / b1 - abs(t - x) / b2) / (4 * b1 * b2)
    edges = [-np.inf, *sorted({0.0, float(t)}), np.inf]
    # relative tolerance only: far-tail densities are tiny in absolute terms
    return math.fsum(
        integrate.quad(f, a, b, epsabs=0.0, epsrel=1e-12, limit=200)[0] for a, b in zip(edges, edges[1:])
    )


def poisson_conditional_enumeration(lambda1, lambda2, k):
    """pmf of X1 | X1 + X2 = k from the Poisson joint pmf, summed exactly."""
    joint = np.array(
        [
            math.exp(-lambda1) * lambda1**x / math.factorial(x)
            * math.exp(-lambda2) * lambda2 ** (k - x) / math.factorial(k - x)
            for x in range(k + 1)
        ]
    )
    return joint / math.fsum(joint)


def bridge_pair_rejection(draw_w1, draw_w2, k, halfwidth, n, rng, batch=2_000_000):
    """Samples of W1 given |W1 + W2 - k| <= halfwidth by simulating the joint.

    ``draw_w1(rng, m)`` / ``draw_w2(rng, m)`` return m independent draws.
    """
    kept = []
    total = 0
    while total < n:
        w1 = draw_w1(rng, batch)
        w2 = draw_w2(rng, batch)
        sel = w1[np.abs(w1 + w2 - k) <= halfwidth]
        kept.append(sel)
        total += len(sel)
    return np.concatenate(kept)[:n]


def crossing_probability_mc(r, budgets, thresholds, delta2, n, rng, batch=1_000_000):
    """Monte Carlo estimate and standard error of the round-r first-crossing probability."""
    budgets = np.asarray(budgets[:r], dtype=float)
    cut = budgets * np.asarray(thresholds[:r], dtype=float)
    sd = np.sqrt(0.5 * delta2**2 * np.diff(np.concatenate([[0.0], budgets])))
    survived = crossed = 0
    done = 0
    while done < n:
        m = min(batch, n - done)
        s = np.zeros(m)
        alive = np.ones(m, dtype=bool)
        for l in range(r - 1):
            s += rng.normal(0.0, sd[l], m)
            alive &= s <= cut[l]
        s += rng.normal(0.0, sd[r - 1], m)
        survived += int(alive.sum())
        crossed += int((alive & (s > cut[r - 1])).sum())
        done += m
    p = crossed / survived
    return p, math.sqrt(p * (1 - p) / survived)


def gaussian_covariance_law(rhos, delta2=1.0):
    """Covariance matrix delta2**2 / (2 max(rho_i, rho_j))."""
    r = np.asarray(rhos, dtype=float)
    return delta2**2 / (2 * np.maximum.outer(r, r))
