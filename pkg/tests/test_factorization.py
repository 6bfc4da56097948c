import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lossless_release.factorization import (
    FactorizedQuery,
    fact_init,
    fact_release,
    left_inverse_check,
)
from lossless_release.ledger import ledger_init


@pytest.fixture
def rng():
    return np.random.default_rng(11)


def test_left_inverse_identity():
    ok, pinv = left_inverse_check(np.eye(4))
    assert ok
    np.testing.assert_allclose(pinv, np.eye(4))


def test_left_inverse_zero_matrix():
    ok, pinv = left_inverse_check(np.zeros((3, 3)))
    assert not ok and pinv is None


def test_left_inverse_random_tall(rng):
    L = rng.normal(size=(8, 3))
    ok, pinv = left_inverse_check(L)
    assert ok
    np.testing.assert_allclose(pinv @ L, np.eye(3), atol=1e-8)


def test_wide_matrix_not_left_invertible(rng):
    assert not left_inverse_check(rng.normal(size=(3, 8)))[0]


def test_shape_mismatch():
    with pytest.raises(ValueError):
        FactorizedQuery(np.eye(3), np.eye(4), 1.0)


def test_identity_L_matches_plain_ledger():
    R = np.array([[1.0, 1.0], [0.0, 1.0]])
    x = np.array([2.0, 5.0])
    q = FactorizedQuery(np.eye(2), R, 1.0)
    fl = fact_init(q, x)
    plain = ledger_init(R @ x, 1.0, "gaussian")
    r1, r2 = np.random.default_rng(3), np.random.default_rng(3)
    for rho in (1.0, 0.3, 2.0):
        np.testing.assert_allclose(fact_release(fl, rho, r1), plain.release(rho, r2), atol=1e-12)


def test_single_release_covariance(rng):
    L = rng.normal(size=(4, 3))
    q = FactorizedQuery(L, np.eye(3), 1.0)
    n = 100_000
    fl = fact_init(q, np.zeros((n, 3)))
    y = fact_release(fl, 2.0, rng)
    target = L @ L.T / 4
    emp = np.cov(y.T)
    se = np.sqrt((target**2 + np.outer(np.diag(target), np.diag(target))) / n)
    assert np.all(np.abs(emp - target) < 4 * se)


def test_prefix_sums_difference_covariance(rng):
    q = FactorizedQuery.prefix_sums(5)
    n = 100_000
    x = rng.integers(0, 3, size=5).astype(float)
    fl = fact_init(q, np.tile(x, (n, 1)))
    y1 = fact_release(fl, 1.0, rng)
    y3 = fact_release(fl, 3.0, rng)
    np.testing.assert_allclose(y1.mean(0), q.A @ x, atol=0.05)
    target = (1 / 1.0 - 1 / 3.0) / 2 * q.L @ q.L.T
    emp = np.cov((y1 - y3).T)
    se = np.sqrt((target**2 + np.outer(np.diag(target), np.diag(target))) / n)
    assert np.all(np.abs(emp - target) < 4 * se)


def test_bounded_factorization(rng):
    q = FactorizedQuery.prefix_sums(3)
    fl = fact_init(q, np.ones(3), rho_inf=5.0, rng=rng)
    assert fl.inner.secret is None
    y = fact_release(fl, 1.0, rng)
    assert y.shape == (3,)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**32))
def test_releases_stay_in_range_of_L(n, seed):
    # every release minus A x lies in the column space of L
    rng = np.random.default_rng(seed)
    L = rng.normal(size=(n + 2, n))
    q = FactorizedQuery(L, np.eye(n), 1.0)
    x = rng.normal(size=n)
    fl = fact_init(q, x)
    resid = fact_release(fl, 0.7, rng) - q.A @ x
    coef, *_ = np.linalg.lstsq(L, resid, rcond=None)
    np.testing.assert_allclose(L @ coef, resid, atol=1e-8 * max(1.0, np.abs(resid).max()))
    assert math.isfinite(float(resid.sum()))
