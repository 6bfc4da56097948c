"""zCDP bookkeeping and the Poisson mechanism's (epsilon, delta) bound.

All logarithms are natural logarithms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable


class PreconditionError(ValueError):
    """A privacy bound was requested outside the range where it holds."""


@dataclass(frozen=True, order=True)
class ZcdpBudget:
    rho: float

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError(f"rho must be > 0, got {self.rho}")


@dataclass(frozen=True)
class ApproxDpParams:
    epsilon: float
    delta: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must be in (0, 1), got {self.delta}")


def _as_rhos(budgets) -> list[float]:
    rhos = [b.rho if isinstance(b, ZcdpBudget) else float(b) for b in budgets]
    if not rhos:
        raise ValueError("need at least one budget")
    return rhos


def zcdp_compose(budgets: Iterable) -> ZcdpBudget:
    """Sequential composition of independent releases: rhos add up."""
    return ZcdpBudget(math.fsum(_as_rhos(budgets)))


def multiple_release_budget(rhos: Iterable) -> ZcdpBudget:
    """Budget spent by any coalition seeing releases ``rhos`` from one lossless ledger."""
    return ZcdpBudget(max(_as_rhos(rhos)))


def gaussian_sigma(delta2: float, rho: float) -> float:
    """Noise standard deviation giving rho-zCDP for l2 sensitivity ``delta2``."""
    if not (delta2 > 0 and rho > 0):
        raise ValueError("sensitivity and rho must be positive")
    return delta2 / math.sqrt(2 * rho)


def poisson_rate_lower_bound(delta: float, d: int, delta_inf: float = 1.0) -> float:
    return max(23 * math.log(10 * d / delta), 2 * delta_inf)


def poisson_epsilon(lam, delta, d=1, delta1=1.0, delta2=1.0, delta_inf=1.0) -> ApproxDpParams:
    """epsilon for the d-dimensional Poisson mechanism with rate ``lam``.

    Raises ``PreconditionError`` unless lam > max(23 log(10 d / delta), 2 delta_inf).
    """
    if not 0 < delta < 1:
        raise ValueError("delta must be in (0, 1)")
    bound = poisson_rate_lower_bound(delta, d, delta_inf)
    if not lam > bound:
        raise PreconditionError(f"lambda={lam} must exceed {bound:.6g}")
    first = delta2 * math.sqrt(2 * math.log(1.25 / delta)) / math.sqrt(lam)
    second = (5 * math.sqrt(2) * delta2 * math.sqrt(math.log(10 / delta)) + 5 / 3 * delta1) / (
        lam * (1 - delta / 10)
    )
    third = (
        2 / 3 * delta_inf * math.log(1.25 / delta)
        + 4 / 3 * delta_inf * math.log(20 * d / delta) * math.log(10 / delta)
    ) / lam
    return ApproxDpParams(first + second + third, delta)


def poisson_epsilon_unit(lam, delta, d=1) -> ApproxDpParams:
    """Relaxed two-term bound for unit sensitivities, valid for delta < 1/100."""
    if not 0 < delta < 0.01:
        raise PreconditionError("the unit-sensitivity bound needs delta < 1/100")
    bound = 23 * math.log(10 * d / delta)
    if not lam > bound:
        raise PreconditionError(f"lambda={lam} must exceed {bound:.6g}")
    eps = math.sqrt(2 * math.log(1.25 / delta)) / math.sqrt(lam) + 2 * math.log(
        20 * d / delta
    ) * math.log(10 / delta) / lam
    return ApproxDpParams(eps, delta)
