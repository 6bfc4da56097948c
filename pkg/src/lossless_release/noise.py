"""Noise distributions, bridging distributions and conditional samplers.

Every sampler takes an injected ``numpy.random.Generator`` and an optional
``size`` (numpy convention).  Parameters may be arrays; they broadcast against
each other and against ``size``.

Privacy parameterizations used throughout the package:

* Gaussian:     variance = sensitivity**2 / (2 * rho)
* Laplace:      scale b  = sensitivity / rho
* Poisson:      rate  lam = sensitivity / rho
* Exponential:  rate  lam = rho / sensitivity   (mean sensitivity / rho)
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr, ndtri_exp

# Bridge variances within this of zero (from below) are treated as rounding.
VARIANCE_CLAMP = 1e-12
# Smallest conditioning mass a truncated Gaussian may be asked for.
MIN_TRUNCATED_MASS = 1e-300


class DomainError(ValueError):
    """Parameters outside a distribution's domain."""


class ImpossibleConditioningError(DomainError):
    """Conditioning event has (numerically) zero probability."""


@dataclass(frozen=True)
class GaussianSpec:
    mean: float
    variance: float

    def __post_init__(self):
        if not self.variance >= 0:
            raise DomainError(f"variance must be >= 0, got {self.variance}")


@dataclass(frozen=True)
class LaplaceSpec:
    scale: float

    def __post_init__(self):
        if not self.scale > 0:
            raise DomainError(f"Laplace scale must be > 0, got {self.scale}")


@dataclass(frozen=True)
class PoissonSpec:
    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise DomainError(f"Poisson rate must be > 0, got {self.rate}")


@dataclass(frozen=True)
class ExponentialSpec:
    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise DomainError(f"exponential rate must be > 0, got {self.rate}")


@dataclass(frozen=True)
class MixtureWeights:
    """Branch probabilities of a two-bridge conditional.

    ``p0``: the new bridge is exactly 0; ``pk``: it absorbs the whole
    difference k; ``pH``: both bridges are continuous.
    """

    p0: np.ndarray
    pk: np.ndarray
    pH: np.ndarray

    def total(self):
        return self.p0 + self.pk + self.pH


# Kept under the name used by callers that think of it as the Laplace case.
LaplaceMixtureWeights = MixtureWeights


def _check_rng(rng):
    if not isinstance(rng, np.random.Generator):
        raise TypeError("rng must be a numpy.random.Generator")


def _clamp_variance(v):
    v = np.asarray(v, dtype=float)
    if np.any(v < -VARIANCE_CLAMP):
        raise DomainError(f"negative variance {np.min(v)}")
    return np.maximum(v, 0.0)


def sample_gaussian(spec: GaussianSpec, rng, size=None):
    """Draw from N(mean, variance); a zero variance returns the mean exactly."""
    _check_rng(rng)
    if spec.variance == 0:
        if size is None:
            return float(spec.mean)
        return np.full(size, float(spec.mean))
    return rng.normal(spec.mean, math.sqrt(spec.variance), size)


# ---------------------------------------------------------------------------
# Gaussian interpolation between two stored releases


def _check_order(rho_l, rho, rho_r):
    if not (rho_l >= 0 and rho > 0 and rho_l <= rho <= rho_r):
        raise DomainError(
            f"need 0 <= rho_l <= rho <= rho_r with rho > 0, got ({rho_l}, {rho}, {rho_r})"
        )


def gaussian_bridge(rho_l: float, rho: float, rho_r: float, delta2: float) -> GaussianSpec:
    """Zero-mean noise added to the weighted neighbor combination.

    ``rho_r`` may be ``math.inf``; ``rho_l`` may be 0 (no more-private neighbor).
    """
    _check_order(rho_l, rho, rho_r)
    if not delta2 > 0:
        raise DomainError(f"sensitivity must be > 0, got {delta2}")
    if rho == rho_r:
        var = 0.0
    elif math.isinf(rho_r):
        var = delta2**2 * (1 - rho_l / rho) / (2 * rho)
    else:
        var = (
            delta2**2
            * (1 - rho_l / rho)
            * (1 / rho - 1 / rho_r)
            / (2 * (1 - rho_l / rho_r))
        )
    return GaussianSpec(0.0, float(_clamp_variance(var)))


def gaussian_combine_weights(rho_l: float, rho: float, rho_r: float) -> tuple[float, float]:
    """Weights ``(w_l, w_r)`` on the left (more private) and right neighbors."""
    _check_order(rho_l, rho, rho_r)
    if rho == rho_r:
        return 0.0, 1.0
    if math.isinf(rho_r):
        w_r = 1 - rho_l / rho
        return 1 - w_r, w_r
    denom = 1 - rho_l / rho_r
    w_r = (1 - rho_l / rho) / denom
    w_l = (rho_l / rho - rho_l / rho_r) / denom
    return w_l, w_r


# ---------------------------------------------------------------------------
# Laplace


def laplace_density(b, x):
    b = np.asarray(b, dtype=float)
    return np.exp(-np.abs(x) / b) / (2 * b)


def laplace_conv_density(b1, b2, t):
    """Density of Lap(0, b1) + Lap(0, b2) at ``t`` (requires b1 != b2)."""
    b1 = np.asarray(b1, dtype=float)
    b2 = np.asarray(b2, dtype=float)
    if np.any(b1 <= 0) or np.any(b2 <= 0):
        raise DomainError("Laplace scales must be positive")
    if np.any(b1 == b2):
        raise DomainError("equal-scale Laplace convolution is not supported")
    at = np.abs(t)
    return (b1 * np.exp(-at / b1) - b2 * np.exp(-at / b2)) / (2 * (b1**2 - b2**2))


def _log_laplace_conv(lo, hi, k):
    # log of (f_lo * f_hi)(k) for lo < hi, stable for large |k|
    ak = np.abs(k)
    return (
        -ak / hi
        + np.log(hi - lo * np.exp(-ak * (1 / lo - 1 / hi)))
        - np.log(2 * (hi**2 - lo**2))
    )


def sample_laplace(b, rng, size=None):
    _check_rng(rng)
    return rng.laplace(0.0, b, size)


def sample_laplace_bridge(b_small, b_large, rng, size=None):
    """Noise W with Lap(0, b_small) + W ~ Lap(0, b_large).

    W is 0 with probability (b_small / b_large)**2, else Lap(0, b_large).
    """
    _check_rng(rng)
    b_small = np.asarray(b_small, dtype=float)
    b_large = np.asarray(b_large, dtype=float)
    if np.any(b_small <= 0) or np.any(b_small >= b_large):
        raise DomainError("need 0 < b_small < b_large")
    shape = np.broadcast_shapes(b_small.shape, b_large.shape) if size is None else size
    zero = rng.random(shape) < (b_small / b_large) ** 2
    draw = rng.laplace(0.0, 1.0, shape) * b_large
    out = np.where(zero, 0.0, draw)
    return float(out) if np.ndim(out) == 0 else out


def _check_laplace_order(b, b2, b1):
    if not (np.all(0 < b2) and np.all(b2 < b) and np.all(b < b1)):
        raise DomainError("need 0 < b2 < b < b1")


def laplace_conditional_weights(b, b2, b1, k) -> MixtureWeights:
    """Branch weights of W1 | W1 + W2 = k for k != 0.

    W1 ~ LapBridge(b2 -> b) takes the b2-release to the b-release and
    W2 ~ LapBridge(b -> b1) takes the b-release to the b1-release, so
    k = Y(b1) - Y(b2) is the observed difference of the two neighbors.
    """
    b, b2, b1, k = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (b, b2, b1, k)))
    _check_laplace_order(b, b2, b1)
    if np.any(k == 0):
        raise DomainError("k = 0 is deterministic: the bridge is 0")
    zero_w1 = (b2 / b) ** 2  # Pr[W1 = 0]
    zero_w2 = (b / b1) ** 2  # Pr[W2 = 0]
    ak = np.abs(k)
    log_terms = np.stack(
        [
            np.log(zero_w1) + np.log1p(-zero_w2) - np.log(2 * b1) - ak / b1,
            np.log1p(-zero_w1) + np.log(zero_w2) - np.log(2 * b) - ak / b,
            np.log1p(-zero_w1) + np.log1p(-zero_w2) + _log_laplace_conv(b, b1, k),
        ]
    )
    log_total = np.logaddexp.reduce(log_terms, axis=0)
    p = np.exp(log_terms - log_total)
    return MixtureWeights(p[0], p[1], p[2])


def laplace_product_density(s1, s2, k, x):
    """Density of X1 = x given X1 + X2 = k, X1 ~ Lap(0, s1), X2 ~ Lap(0, s2)."""
    return laplace_density(s1, x) * laplace_density(s2, k - x) / laplace_conv_density(s1, s2, k)


def sample_laplace_product(s1, s2, k, rng, size=None):
    """Exact sampler for the density proportional to f_s1(x) f_s2(k - x).

    On each of (-inf, min(0,k)), [min(0,k), max(0,k)] and (max(0,k), inf) the
    density is a single exponential, so every piece is sampled by inverse CDF.
    """
    _check_rng(rng)
    s1, s2, k = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (s1, s2, k)))
    if size is not None:
        s1, s2, k = (np.broadcast_to(v, size) for v in (s1, s2, k))
    if np.any(s1 == s2):
        raise DomainError("equal scales are not supported")
    sign = np.where(k < 0, -1.0, 1.0)
    k = np.abs(k)  # density is symmetric under (x, k) -> (-x, -k)

    a = 1 / s1 + 1 / s2
    c = 1 / s2 - 1 / s1  # slope inside [0, k]
    with np.errstate(divide="ignore", invalid="ignore"):
        log_mid = np.where(k > 0, np.log(np.expm1(c * k) / c), -np.inf)
    log_m = np.stack([-k / s2 - np.log(a), -k / s2 + log_mid, -k / s1 - np.log(a)])
    log_m = log_m - np.logaddexp.reduce(log_m, axis=0)
    cum = np.cumsum(np.exp(log_m), axis=0)
    u = rng.random(k.shape)
    piece = (u > cum[0]).astype(int) + (u > cum[1]).astype(int)

    e = rng.exponential(1.0, k.shape) / a
    v = rng.random(k.shape)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        mid = np.log1p(v * np.expm1(c * k)) / c
    mid = np.clip(np.nan_to_num(mid, nan=0.0), 0.0, k)
    x = np.select([piece == 0, piece == 1], [-e, mid], k + e)
    x = sign * x
    return float(x) if x.ndim == 0 else x


def sample_laplace_conditional(b, b2, b1, k, rng, size=None):
    """Sample W1 | W1 + W2 = k (see ``laplace_conditional_weights``).

    k = 0 returns 0: both bridges were at their atoms.
    """
    _check_rng(rng)
    b, b2, b1, k = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (b, b2, b1, k)))
    if size is not None:
        b, b2, b1, k = (np.broadcast_to(v, size) for v in (b, b2, b1, k))
    _check_laplace_order(b, b2, b1)
    out = np.zeros(k.shape)
    nz = k != 0
    if np.any(nz):
        kk = k[nz]
        w = laplace_conditional_weights(b[nz], b2[nz], b1[nz], kk)
        u = rng.random(kk.shape)
        h = sample_laplace_product(b[nz], b1[nz], kk, rng)
        out[nz] = np.where(u < w.p0, 0.0, np.where(u < w.p0 + w.pk, kk, h))
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Poisson


def sample_poisson(lam, rng, size=None):
    _check_rng(rng)
    return rng.poisson(lam, size)


def sample_poisson_bridge(lambda_high, lambda_low, rng, size=None):
    """Poi(lambda_high - lambda_low): Poi(lambda_low) plus this is Poi(lambda_high)."""
    _check_rng(rng)
    lambda_high = np.asarray(lambda_high, dtype=float)
    lambda_low = np.asarray(lambda_low, dtype=float)
    if np.any(lambda_low <= 0) or np.any(lambda_high <= lambda_low):
        raise DomainError("need lambda_high > lambda_low > 0")
    return rng.poisson(lambda_high - lambda_low, size)


def poisson_conditional_pmf(lambda1, lambda2, k):
    """pmf over 0..k of X1 | X1 + X2 = k for independent Poissons."""
    from scipy.stats import binom

    if k < 0:
        raise DomainError("k must be >= 0")
    return binom.pmf(np.arange(k + 1), k, lambda1 / (lambda1 + lambda2))


def sample_poisson_conditional(lambda1, lambda2, k, rng, size=None):
    """X1 | X1 + X2 = k, i.e. Binomial(k, lambda1 / (lambda1 + lambda2))."""
    _check_rng(rng)
    lambda1 = np.asarray(lambda1, dtype=float)
    lambda2 = np.asarray(lambda2, dtype=float)
    k = np.asarray(k)
    if np.any(lambda1 <= 0) or np.any(lambda2 <= 0):
        raise DomainError("Poisson rates must be positive")
    if np.any(k < 0):
        raise DomainError("k must be >= 0")
    return rng.binomial(k.astype(np.int64), lambda1 / (lambda1 + lambda2), size)


# ---------------------------------------------------------------------------
# Exponential


def sample_exponential(lam, rng, size=None):
    _check_rng(rng)
    return rng.exponential(1.0, size) / lam


def sample_exponential_bridge(lambda1, lambda2, rng, size=None):
    """Noise W with Exp(lambda2) + W ~ Exp(lambda1), for lambda1 < lambda2.

    W is 0 with probability lambda1 / lambda2, else Exp(lambda1).
    """
    _check_rng(rng)
    lambda1 = np.asarray(lambda1, dtype=float)
    lambda2 = np.asarray(lambda2, dtype=float)
    if np.any(lambda1 <= 0) or np.any(lambda1 >= lambda2):
        raise DomainError("need 0 < lambda1 < lambda2")
    shape = np.broadcast_shapes(lambda1.shape, lambda2.shape) if size is None else size
    zero = rng.random(shape) < lambda1 / lambda2
    out = np.where(zero, 0.0, rng.exponential(1.0, shape) / lambda1)
    return float(out) if np.ndim(out) == 0 else out


def exponential_conditional_weights(lam, lam_r, lam_l, k) -> MixtureWeights:
    """Branch weights of W1 | W1 + W2 = k > 0, with lam_l < lam < lam_r.

    W1 ~ ExpBridge(lam_r -> lam) and W2 ~ ExpBridge(lam -> lam_l).
    """
    lam, lam_r, lam_l, k = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (lam, lam_r, lam_l, k))
    )
    if not (np.all(0 < lam_l) and np.all(lam_l < lam) and np.all(lam < lam_r)):
        raise DomainError("need 0 < lam_l < lam < lam_r")
    if np.any(k <= 0):
        raise DomainError("k must be > 0")
    zero_w1 = lam / lam_r
    zero_w2 = lam_l / lam
    gap = lam - lam_l
    log_terms = np.stack(
        [
            np.log(zero_w1) + np.log1p(-zero_w2) + np.log(lam_l) - lam_l * k,
            np.log1p(-zero_w1) + np.log(zero_w2) + np.log(lam) - lam * k,
            np.log1p(-zero_w1)
            + np.log1p(-zero_w2)
            + np.log(lam * lam_l / gap)
            - lam_l * k
            + np.log(-np.expm1(-gap * k)),
        ]
    )
    log_total = np.logaddexp.reduce(log_terms, axis=0)
    p = np.exp(log_terms - log_total)
    return MixtureWeights(p[0], p[1], p[2])


def sample_exponential_conditional(lam, lam_r, lam_l, k, rng, size=None):
    """Sample W1 | W1 + W2 = k for the exponential bridges; k = 0 returns 0.

    In the continuous branch W1 has density proportional to
    exp(-(lam - lam_l) x) on [0, k].
    """
    _check_rng(rng)
    lam, lam_r, lam_l, k = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (lam, lam_r, lam_l, k))
    )
    if size is not None:
        lam, lam_r, lam_l, k = (np.broadcast_to(v, size) for v in (lam, lam_r, lam_l, k))
    if np.any(k < 0):
        raise DomainError("exponential bridges are nonnegative; k must be >= 0")
    out = np.zeros(k.shape)
    nz = k > 0
    if np.any(nz):
        kk = k[nz]
        w = exponential_conditional_weights(lam[nz], lam_r[nz], lam_l[nz], kk)
        gap = lam[nz] - lam_l[nz]
        v = rng.random(kk.shape)
        h = -np.log1p(v * np.expm1(-gap * kk)) / gap
        h = np.clip(h, 0.0, kk)
        u = rng.random(kk.shape)
        out[nz] = np.where(u < w.p0, 0.0, np.where(u < w.p0 + w.pk, kk, h))
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Truncated Gaussian


def sample_truncated_gaussian(spec: GaussianSpec, lower, upper, rng, size=None):
    """N(mean, variance) conditioned on (lower, upper], by inverse CDF.

    The interval is mirrored into the lower tail when it lies above the mean,
    and quantiles are computed from log-CDFs so far tails stay accurate.
    """
    _check_rng(rng)
    if not spec.variance > 0:
        raise DomainError("truncated Gaussian needs positive variance")
    sd = math.sqrt(spec.variance)
    lo = (np.asarray(lower, dtype=float) - spec.mean) / sd
    hi = (np.asarray(upper, dtype=float) - spec.mean) / sd
    lo, hi = np.broadcast_arrays(lo, hi)
    if size is not None:
        lo, hi = np.broadcast_to(lo, size), np.broadcast_to(hi, size)
    if np.any(lo >= hi):
        raise DomainError("need lower < upper")

    flip = lo > 0
    a = np.where(flip, -hi, lo)
    b = np.where(flip, -lo, hi)
    log_fa = log_ndtr(a)
    log_fb = log_ndtr(b)
    ratio = np.exp(log_fa - log_fb)
    log_mass = log_fb + np.log1p(-ratio)
    if np.any(log_mass < math.log(MIN_TRUNCATED_MASS)):
        raise ImpossibleConditioningError("truncation interval has numerically zero mass")
    u = rng.random(a.shape)
    x = ndtri_exp(log_fb + np.log(ratio + u * (1 - ratio)))
    x = np.clip(x, a, b)
    x = np.where(flip, -x, x)
    out = spec.mean + sd * x
    # half-open interval: never return the excluded lower endpoint
    low_edge = np.asarray(lower, dtype=float)
    out = np.where(out <= low_edge, np.nextafter(low_edge, np.inf), out)
    out = np.minimum(out, np.asarray(upper, dtype=float))
    return float(out) if out.ndim == 0 else out
