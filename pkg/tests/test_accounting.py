import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from lossless_release import accounting as acc
from lossless_release.accounting import PreconditionError, ZcdpBudget
from lossless_release.suite import poisson_unit_epsilon_mpmath

rhos = st.floats(1e-6, 1e3, allow_nan=False)


def test_compose_examples():
    assert acc.zcdp_compose([1, 2]).rho == 3
    assert acc.zcdp_compose([0.7]).rho == 0.7
    assert acc.zcdp_compose([0.1] * 10).rho == 1.0
    assert acc.zcdp_compose([ZcdpBudget(0.5), 1.5]).rho == 2.0


def test_multiple_release_is_max():
    assert acc.multiple_release_budget({0.5, 2, 1}).rho == 2
    assert acc.multiple_release_budget([0.3]).rho == 0.3
    assert acc.zcdp_compose({0.5, 2, 1}).rho == 3.5


def test_empty_and_invalid_budgets():
    with pytest.raises(ValueError):
        acc.zcdp_compose([])
    with pytest.raises(ValueError):
        ZcdpBudget(0.0)


def test_gaussian_sigma():
    assert acc.gaussian_sigma(1, 0.5) == 1
    assert acc.gaussian_sigma(2, 2) == 1
    assert acc.gaussian_sigma(1, 5) == pytest.approx(math.sqrt(0.1))


@given(rhos, rhos, rhos)
def test_compose_associative(a, b, c):
    left = acc.zcdp_compose([acc.zcdp_compose([a, b]), c]).rho
    right = acc.zcdp_compose([a, acc.zcdp_compose([b, c])]).rho
    assert left == pytest.approx(right, rel=1e-12)


@given(st.lists(rhos, min_size=1, max_size=10), rhos)
def test_budgets_monotone(base, extra):
    assert acc.zcdp_compose(base + [extra]).rho >= acc.zcdp_compose(base).rho
    assert acc.multiple_release_budget(base + [extra]).rho >= acc.multiple_release_budget(base).rho
    assert acc.multiple_release_budget(base).rho <= acc.zcdp_compose(base).rho


def test_poisson_worked_value():
    res = acc.poisson_epsilon_unit(1000, 1e-6, 1)
    assert res.epsilon == pytest.approx(0.70949, abs=1e-5)
    t1, t2 = poisson_unit_epsilon_mpmath(1000, 1e-6)
    assert t1 == pytest.approx(0.1676, abs=1e-4)
    assert t2 == pytest.approx(0.5419, abs=1e-4)
    assert res.epsilon == pytest.approx(t1 + t2, rel=1e-12)


def test_poisson_precondition():
    bound = 23 * math.log(1e7)
    assert bound == pytest.approx(370.72, abs=0.01)
    with pytest.raises(PreconditionError):
        acc.poisson_epsilon_unit(370.0, 1e-6, 1)
    with pytest.raises(PreconditionError):
        acc.poisson_epsilon(370.0, 1e-6, 1)
    with pytest.raises(PreconditionError):
        acc.poisson_epsilon_unit(1000, 0.05, 1)


def test_full_theorem_finite_and_positive():
    res = acc.poisson_epsilon(1000, 1e-6)
    assert math.isfinite(res.epsilon) and res.epsilon > 0


@given(st.floats(400, 1e7), st.floats(1e-12, 9e-3))
def test_poisson_epsilon_decreases_with_rate(lam, delta):
    lo_bound = acc.poisson_rate_lower_bound(delta, 1)
    if lam <= lo_bound:
        lam = 2 * lo_bound
    a = acc.poisson_epsilon_unit(lam, delta).epsilon
    b = acc.poisson_epsilon_unit(2 * lam, delta).epsilon
    assert b < a
