"""Weakly lossless gradual release of thresholded Gaussian histograms.

Two release algorithms share one output law:

* ``naive_release`` keeps dense noise for all d coordinates.
* ``efficient_release`` only tracks the support plus the zero counts that
  have ever crossed a threshold; the rest are simulated with a binomial draw
  of how many untracked zeros cross in this round.

Noise bookkeeping uses scaled sums: after round r the aggregate noise of a
coordinate is ``S_r / rho_r`` where ``S_r`` is a sum of independent
N(0, delta2**2 (rho_l - rho_{l-1}) / 2) increments.  A zero count is released
in round l iff ``S_l > rho_l * tau_l``.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid
from scipy.signal import fftconvolve
from scipy.special import log_ndtr, ndtr

from .noise import GaussianSpec, ImpossibleConditioningError, sample_truncated_gaussian

GRID_POINTS = 2**14 + 1  # odd so that 0 is a grid point
GRID_HALF_WIDTH_SD = 10.0
ROW_CHUNK = 256


class GradualOrderError(ValueError):
    """Budgets must strictly increase from round to round."""


@dataclass
class Histogram:
    d: int
    counts: dict  # index -> nonzero count

    def __post_init__(self):
        self.counts = {int(i): c for i, c in self.counts.items() if c != 0}
        if any(not 0 <= i < self.d for i in self.counts):
            raise ValueError("histogram index out of range")

    @property
    def support(self) -> set:
        return set(self.counts)

    @property
    def k(self) -> int:
        return len(self.counts)

    def dense(self) -> np.ndarray:
        out = np.zeros(self.d)
        for i, c in self.counts.items():
            out[i] = c
        return out

    @classmethod
    def from_dense(cls, values) -> "Histogram":
        values = np.asarray(values)
        return cls(len(values), {int(i): values[i].item() for i in np.flatnonzero(values)})


@dataclass
class NaiveHistState:
    rho_prev: float = 0.0
    Z_prev: np.ndarray | None = None


@dataclass
class EffHistState:
    round: int = 0
    budgets: list = field(default_factory=list)
    thresholds: list = field(default_factory=list)
    tracked: dict = field(default_factory=dict)  # index -> aggregate noise Z
    draws: int = 0
    activated: int = 0


def _check_budget(rho, rho_prev):
    if not rho > rho_prev:
        raise GradualOrderError(f"rho={rho} must exceed the previous budget {rho_prev}")


def _step_variances(budgets, delta2):
    b = np.concatenate([[0.0], np.asarray(budgets, dtype=float)])
    if np.any(np.diff(b) <= 0):
        raise GradualOrderError("budgets must be strictly increasing and positive")
    return 0.5 * delta2**2 * np.diff(b)


def naive_release(hist: Histogram, state: NaiveHistState, rho, tau, delta2, rng) -> np.ndarray:
    """One round of the dense algorithm; updates ``state`` in place."""
    _check_budget(rho, state.rho_prev)
    fresh = rng.normal(0.0, math.sqrt(0.5 * delta2**2 * (rho - state.rho_prev)), hist.d)
    if state.Z_prev is None:
        Z = fresh / rho
    else:
        Z = (state.rho_prev / rho) * state.Z_prev + fresh / rho
    noisy = hist.dense() + Z
    state.rho_prev, state.Z_prev = float(rho), Z
    return np.where(noisy > tau, noisy, 0.0)


# ---------------------------------------------------------------------------
# Crossing probabilities of never-released zero counts


@dataclass(frozen=True)
class _GridModel:
    x: np.ndarray
    h: float
    variances: np.ndarray
    cutoffs: np.ndarray
    # survivor densities of S_1..S_{r-1} restricted to {S_l <= c_l for all l},
    # each normalized to unit mass
    survivors: tuple
    p: float


def _gauss_kernel(var, h):
    half = max(1, int(math.ceil(12 * math.sqrt(var) / h)))
    half = min(half, GRID_POINTS)
    t = np.arange(-half, half + 1) * h
    ker = np.exp(-0.5 * t * t / var)
    return ker / ker.sum()


def _normalize(g, h):
    mass = trapezoid(g, dx=h)
    if not mass > 0:
        raise ImpossibleConditioningError("no probability mass survives the earlier thresholds")
    return g / mass


@functools.lru_cache(maxsize=256)
def _grid_model(budgets: tuple, thresholds: tuple, delta2: float) -> _GridModel:
    r = len(budgets)
    variances = _step_variances(budgets, delta2)
    cutoffs = np.asarray(budgets) * np.asarray(thresholds, dtype=float)
    half = GRID_HALF_WIDTH_SD * math.sqrt(variances.sum())
    x = np.linspace(-half, half, GRID_POINTS)
    h = x[1] - x[0]
    survivors = []
    if r == 1:
        p = float(ndtr(-cutoffs[0] / math.sqrt(variances[0])))
        return _GridModel(x, h, variances, cutoffs, (), p)
    g = np.exp(-0.5 * x * x / variances[0])
    g[x > cutoffs[0]] = 0.0
    survivors.append(_normalize(g, h))
    for l in range(1, r - 1):
        g = fftconvolve(survivors[-1], _gauss_kernel(variances[l], h), mode="same")
        g = np.maximum(g, 0.0)
        g[x > cutoffs[l]] = 0.0
        survivors.append(_normalize(g, h))
    tail = ndtr((x - cutoffs[r - 1]) / math.sqrt(variances[r - 1]))
    p = float(np.clip(trapezoid(survivors[-1] * tail, dx=h), 0.0, 1.0))
    return _GridModel(x, h, variances, cutoffs, tuple(survivors), p)


def crossing_probability(r: int, budgets, thresholds, delta2: float) -> float:
    """Pr[a zero count first crosses in round r | it never crossed before].

    Computed by propagating the density of the scaled noise sum on a grid.
    """
    if r < 1 or r > len(budgets) or r > len(thresholds):
        raise ValueError("need 1 <= r <= number of rounds")
    if not delta2 > 0:
        raise ValueError("sensitivity must be > 0")
    key_b = tuple(float(b) for b in budgets[:r])
    key_t = tuple(float(t) for t in thresholds[:r])
    _step_variances(key_b, delta2)
    return _grid_model(key_b, key_t, float(delta2)).p


def _sample_rows(logw, rng):
    """One grid index per row of log-weights ``logw``."""
    logw = logw - logw.max(axis=1, keepdims=True)
    w = np.exp(logw)
    cum = np.cumsum(w, axis=1)
    target = rng.random(len(w)) * cum[:, -1]
    return np.minimum((cum < target[:, None]).sum(axis=1), w.shape[1] - 1)


def _jitter(x, idx, h, upper, rng):
    s = x[idx] + (rng.random(len(idx)) - 0.5) * h
    return np.minimum(s, upper)


def sample_first_crossing(r, budgets, thresholds, delta2, n, rng, path="exact"):
    """Scaled noise sums S_r for ``n`` zero counts that first cross in round r.

    ``path="exact"`` draws the whole prefix S_1..S_r from its conditional law
    (S_{r-1} from the grid, the last step as an exact truncated Gaussian, then
    backwards).  ``path="sequential"`` truncates each step given only the past;
    it is cheaper but does not reproduce the conditional law for r >= 2.
    Returns the sums; exactly ``r`` Gaussian draws are used per count.
    """
    if n == 0:
        return np.empty(0)
    model = _grid_model(tuple(budgets[:r]), tuple(thresholds[:r]), float(delta2))
    v, c = model.variances, model.cutoffs
    if r == 1 or path == "sequential":
        s = np.zeros(n)
        for l in range(r - 1):
            s = s + sample_truncated_gaussian(GaussianSpec(0.0, v[l]), -np.inf, c[l] - s, rng, n)
        return s + sample_truncated_gaussian(GaussianSpec(0.0, v[r - 1]), c[r - 1] - s, np.inf, rng, n)
    if path != "exact":
        raise ValueError(f"unknown path sampler {path!r}")

    x, h = model.x, model.h
    sd_last = math.sqrt(v[r - 1])
    with np.errstate(divide="ignore"):
        logw = np.log(model.survivors[r - 2]) + log_ndtr((x - c[r - 1]) / sd_last)
    w = np.exp(logw - logw.max())
    cum = np.cumsum(w)
    idx = np.minimum(np.searchsorted(cum, rng.random(n) * cum[-1], side="right"), len(x) - 1)
    prev = _jitter(x, idx, h, c[r - 2], rng)
    last = prev + sample_truncated_gaussian(GaussianSpec(0.0, v[r - 1]), c[r - 1] - prev, np.inf, rng, n)
    nxt = prev
    for l in range(r - 3, -1, -1):
        with np.errstate(divide="ignore"):
            log_surv = np.log(model.survivors[l])
        idx = np.empty(n, dtype=np.int64)
        # chunked so the (rows x grid) weight matrix stays small
        for a in range(0, n, ROW_CHUNK):
            part = nxt[a : a + ROW_CHUNK]
            logw = log_surv[None, :] - 0.5 * (part[:, None] - x[None, :]) ** 2 / v[l + 1]
            idx[a : a + ROW_CHUNK] = _sample_rows(logw, rng)
        nxt = _jitter(x, idx, h, c[l], rng)
    return last


def _sample_untracked(d, tracked, q, rng):
    """Uniform subset of size q from [d] minus ``tracked``."""
    free = d - len(tracked)
    if q > free:
        raise ValueError("not enough untracked indices")
    if q == 0:
        return np.empty(0, dtype=np.int64)
    if free <= 4 * q or d <= 4096:
        pool = np.setdiff1d(np.arange(d), np.fromiter(tracked, dtype=np.int64, count=len(tracked)))
        return rng.choice(pool, size=q, replace=False)
    chosen: dict = {}
    while len(chosen) < q:
        for i in rng.integers(0, d, size=2 * (q - len(chosen))).tolist():
            if i not in tracked and i not in chosen:
                chosen[i] = None
                if len(chosen) == q:
                    break
    return np.fromiter(chosen, dtype=np.int64, count=q)


def efficient_release(
    hist: Histogram, state: EffHistState, rho_r, tau_r, delta2, rng, path="exact"
) -> dict:
    """One round of the sparse algorithm; returns ``{index: released value}``.

    ``state.draws`` counts every Gaussian sampled, truncated or not.
    """
    prev = state.budgets[-1] if state.budgets else 0.0
    _check_budget(rho_r, prev)
    if state.round == 0:
        state.tracked = {i: 0.0 for i in hist.support}
    state.round += 1
    state.budgets.append(float(rho_r))
    state.thresholds.append(float(tau_r))
    r = state.round

    out = {}
    idx = np.fromiter(state.tracked, dtype=np.int64, count=len(state.tracked))
    if len(idx):
        z_prev = np.fromiter(state.tracked.values(), dtype=float, count=len(idx))
        fresh = rng.normal(0.0, math.sqrt(0.5 * delta2**2 * (rho_r - prev)), len(idx))
        z = (prev / rho_r) * z_prev + fresh / rho_r
        state.draws += len(idx)
        counts = np.array([hist.counts.get(int(i), 0) for i in idx], dtype=float)
        noisy = counts + z
        for i, zi, yi in zip(idx.tolist(), z.tolist(), noisy.tolist()):
            state.tracked[i] = zi
            if yi > tau_r:
                out[i] = yi

    free = hist.d - len(state.tracked)
    if free > 0:
        p = crossing_probability(r, state.budgets, state.thresholds, delta2)
        q = int(rng.binomial(free, p))
        chosen = _sample_untracked(hist.d, state.tracked, q, rng)
        if q:
            sums = sample_first_crossing(r, state.budgets, state.thresholds, delta2, q, rng, path)
            z = sums / rho_r
            z = np.where(z > tau_r, z, np.nextafter(tau_r, np.inf))
            state.draws += q * r
            state.activated += q
            for i, zi in zip(chosen.tolist(), z.tolist()):
                state.tracked[i] = zi
                out[i] = zi
    return dict(sorted(out.items()))


def static_threshold_simulate(hist: Histogram, tau, noise, rng) -> dict:
    """Single thresholded release with i.i.d. noise from the frozen distribution ``noise``.

    Only the support and the (binomially many) zero counts above ``tau`` are
    sampled.
    """
    out = {}
    idx = sorted(hist.support)
    if idx:
        vals = np.array([hist.counts[i] for i in idx], dtype=float) + noise.rvs(
            size=len(idx), random_state=rng
        )
        out.update({i: v for i, v in zip(idx, vals.tolist()) if v > tau})
    free = hist.d - hist.k
    p = float(noise.sf(tau))
    q = int(rng.binomial(free, p)) if free else 0
    if q:
        chosen = _sample_untracked(hist.d, hist.support, q, rng)
        u = 1.0 - rng.random(q)  # (0, 1]
        vals = noise.isf(u * p)
        vals = np.where(vals > tau, vals, np.nextafter(tau, np.inf))
        out.update(zip(chosen.tolist(), vals.tolist()))
    return dict(sorted(out.items()))
