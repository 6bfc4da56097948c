"""Lossless multiple release for factorization mechanisms A = L R.

The ledger keeps the correlated Gaussian noise in the d-dimensional space
between R and L; every output is ``offset + L @ u`` for the stored pre-L
vector ``u``.  Since L is linear, correlations between releases come straight
from the Gaussian engine whether or not L is invertible.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ledger import Ledger, ledger_init

# Singular values below this fraction of the largest count as zero.
RANK_RTOL = 1e-10


def left_inverse_check(L) -> tuple[bool, np.ndarray | None]:
    """Whether L has full column rank; if so also return its pseudo-inverse."""
    L = np.atleast_2d(np.asarray(L, dtype=float))
    s = np.linalg.svd(L, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return False, None
    rank = int(np.sum(s > RANK_RTOL * s[0]))
    if rank < L.shape[1]:
        return False, None
    return True, np.linalg.pinv(L, rcond=RANK_RTOL)


@dataclass
class FactorizedQuery:
    L: np.ndarray
    R: np.ndarray
    sensitivity: float
    left_invertible: bool = field(init=False)

    def __post_init__(self):
        self.L = np.atleast_2d(np.asarray(self.L, dtype=float))
        self.R = np.atleast_2d(np.asarray(self.R, dtype=float))
        if self.L.shape[1] != self.R.shape[0]:
            raise ValueError(f"L is {self.L.shape} but R is {self.R.shape}")
        if not self.sensitivity > 0:
            raise ValueError("sensitivity must be > 0")
        self.left_invertible, _ = left_inverse_check(self.L)

    @property
    def A(self):
        return self.L @ self.R

    @classmethod
    def prefix_sums(cls, n: int, sensitivity: float = 1.0) -> "FactorizedQuery":
        """Prefix-sum workload with L = A (lower-triangular ones), R = I."""
        return cls(np.tril(np.ones((n, n))), np.eye(n), sensitivity)


@dataclass
class FactLedger:
    query: FactorizedQuery
    inner: Ledger
    offset: np.ndarray  # A x when rho_inf = inf, else zeros

    @property
    def rhos(self):
        return self.inner.rhos

    def noise(self, rho):
        """Stored pre-L noise at ``rho`` (only when the exact value is retained)."""
        return self.inner.entries[rho]


def fact_init(query: FactorizedQuery, x, rho_inf=math.inf, rng=None) -> FactLedger:
    """Start a ledger for releasing ``A @ x``.

    ``x`` may carry leading batch axes; the last axis is the data dimension.
    """
    x = np.asarray(x, dtype=float)
    Rx = x @ query.R.T
    if math.isinf(rho_inf):
        # pre-L noise ledger around 0; the exact product is retained
        inner = ledger_init(np.zeros_like(Rx), query.sensitivity, "gaussian", rho_inf)
        offset = Rx @ query.L.T
    else:
        inner = ledger_init(Rx, query.sensitivity, "gaussian", rho_inf, rng)
        offset = np.zeros(Rx.shape[:-1] + (query.L.shape[0],))
    return FactLedger(query, inner, offset)


def fact_release(ledger: FactLedger, rho: float, rng) -> np.ndarray:
    """Release ``A x`` at privacy level ``rho``: L (R x + correlated noise)."""
    u = ledger.inner.release(rho, rng)
    return ledger.offset + u @ ledger.query.L.T
