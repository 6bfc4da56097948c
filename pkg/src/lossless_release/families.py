"""Noise families satisfying the convolution preorder.

A family maps a privacy parameter rho to a native noise parameter and knows
three samplers: fresh noise at rho, the bridge that degrades a release at a
larger rho into one at a smaller rho, and the conditional bridge that places a
new release between two stored neighbors.
"""
from __future__ import annotations

import math

import numpy as np

from . import noise
from .noise import DomainError

# Neighbor differences this far from an integer are rejected for Poisson.
POISSON_INTEGER_TOL = 1e-6


class NoiseFamily:
    tag: str = ""
    # Only the Gaussian can keep the exact query value as a rho = inf sentinel.
    supports_unbounded: bool = False

    def native(self, rho, sensitivity):
        raise NotImplementedError

    def base(self, rho, sensitivity, rng, shape):
        """Fresh noise for a single release at ``rho``."""
        raise NotImplementedError

    def bridge(self, rho_hi, rho_lo, sensitivity, rng, shape):
        """Noise W such that (release at rho_hi) + W is a release at rho_lo."""
        raise NotImplementedError

    def between(self, rho_l, y_l, rho, rho_r, y_r, sensitivity, rng):
        """New release at rho given stored neighbors rho_l < rho < rho_r."""
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}()"


class GaussianFamily(NoiseFamily):
    tag = "gaussian"
    supports_unbounded = True

    def native(self, rho, sensitivity):
        return sensitivity**2 / (2 * rho)  # variance

    def base(self, rho, sensitivity, rng, shape):
        return rng.normal(0.0, math.sqrt(self.native(rho, sensitivity)), shape)

    def bridge(self, rho_hi, rho_lo, sensitivity, rng, shape):
        spec = noise.gaussian_bridge(0.0, rho_lo, rho_hi, sensitivity)
        return noise.sample_gaussian(spec, rng, shape)

    def between(self, rho_l, y_l, rho, rho_r, y_r, sensitivity, rng):
        # rho_l may be 0 (y_l unused) and rho_r may be inf (y_r is the exact value)
        w_l, w_r = noise.gaussian_combine_weights(rho_l, rho, rho_r)
        spec = noise.gaussian_bridge(rho_l, rho, rho_r, sensitivity)
        z = noise.sample_gaussian(spec, rng, np.shape(y_r))
        if w_l == 0:
            return w_r * y_r + z
        return w_l * y_l + w_r * y_r + z


class LaplaceFamily(NoiseFamily):
    tag = "laplace"

    def native(self, rho, sensitivity):
        return sensitivity / rho  # scale b

    def base(self, rho, sensitivity, rng, shape):
        return rng.laplace(0.0, self.native(rho, sensitivity), shape)

    def bridge(self, rho_hi, rho_lo, sensitivity, rng, shape):
        return noise.sample_laplace_bridge(
            self.native(rho_hi, sensitivity), self.native(rho_lo, sensitivity), rng, shape
        )

    def between(self, rho_l, y_l, rho, rho_r, y_r, sensitivity, rng):
        k = y_l - y_r
        w1 = noise.sample_laplace_conditional(
            self.native(rho, sensitivity),
            self.native(rho_r, sensitivity),
            self.native(rho_l, sensitivity),
            k,
            rng,
        )
        # atom at W1 = k: copy y_l instead of recomputing y_r + (y_l - y_r)
        return np.where(w1 == k, y_l, y_r + w1)


class PoissonFamily(NoiseFamily):
    tag = "poisson"

    def native(self, rho, sensitivity):
        return sensitivity / rho  # rate lambda

    def base(self, rho, sensitivity, rng, shape):
        return rng.poisson(self.native(rho, sensitivity), shape).astype(float)

    def bridge(self, rho_hi, rho_lo, sensitivity, rng, shape):
        return noise.sample_poisson_bridge(
            self.native(rho_lo, sensitivity), self.native(rho_hi, sensitivity), rng, shape
        ).astype(float)

    def between(self, rho_l, y_l, rho, rho_r, y_r, sensitivity, rng):
        diff = np.asarray(y_l - y_r, dtype=float)
        n = np.rint(diff)
        if np.any(np.abs(diff - n) > POISSON_INTEGER_TOL) or np.any(n < 0):
            raise DomainError("Poisson neighbors must differ by a nonnegative integer")
        lam_l = self.native(rho_l, sensitivity)
        lam = self.native(rho, sensitivity)
        lam_r = self.native(rho_r, sensitivity)
        w1 = noise.sample_poisson_conditional(lam - lam_r, lam_l - lam, n, rng)
        return y_r + w1


class ExponentialFamily(NoiseFamily):
    tag = "exponential"

    def native(self, rho, sensitivity):
        return rho / sensitivity  # rate lambda

    def base(self, rho, sensitivity, rng, shape):
        return rng.exponential(1.0, shape) / self.native(rho, sensitivity)

    def bridge(self, rho_hi, rho_lo, sensitivity, rng, shape):
        return noise.sample_exponential_bridge(
            self.native(rho_lo, sensitivity), self.native(rho_hi, sensitivity), rng, shape
        )

    def between(self, rho_l, y_l, rho, rho_r, y_r, sensitivity, rng):
        k = np.maximum(y_l - y_r, 0.0)
        w1 = noise.sample_exponential_conditional(
            self.native(rho, sensitivity),
            self.native(rho_r, sensitivity),
            self.native(rho_l, sensitivity),
            k,
            rng,
        )
        return np.where(w1 == k, y_l, y_r + w1)


FAMILIES: dict[str, NoiseFamily] = {
    f.tag: f for f in (GaussianFamily(), LaplaceFamily(), PoissonFamily(), ExponentialFamily())
}


def get_family(tag) -> NoiseFamily:
    if isinstance(tag, NoiseFamily):
        return tag
    try:
        return FAMILIES[tag]
    except KeyError:
        raise ValueError(f"unknown mechanism {tag!r}; choose from {sorted(FAMILIES)}") from None
