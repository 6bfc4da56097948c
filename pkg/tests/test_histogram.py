import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from lossless_release import histogram as hg
from lossless_release.histogram import EffHistState, Histogram, NaiveHistState
from lossless_release.oracles import crossing_probability_mc

BUDGETS = [0.3, 1.0, 3.0]
THRESHOLDS = [3.0, 2.0, 1.5]


@pytest.fixture
def rng():
    return np.random.default_rng(5)


def conditional_sums_mc(r, n, rng):
    """S_r for paths that stay below the cut-offs before round r and cross in it."""
    b = np.array(BUDGETS[:r])
    cut = b * np.array(THRESHOLDS[:r])
    sd = np.sqrt(0.5 * np.diff(np.concatenate([[0.0], b])))
    out = []
    while sum(map(len, out)) < n:
        s = np.cumsum(rng.normal(0, 1, (2_000_000, r)) * sd, axis=1)
        ok = np.all(s[:, :-1] <= cut[:-1], axis=1) & (s[:, -1] > cut[-1])
        out.append(s[ok, -1])
    return np.concatenate(out)[:n]


def test_histogram_validation():
    with pytest.raises(ValueError):
        Histogram(5, {7: 1})
    h = Histogram(5, {1: 2, 3: 0})
    assert h.support == {1} and h.k == 1
    np.testing.assert_array_equal(Histogram.from_dense(h.dense()).dense(), h.dense())


def test_naive_first_round_variance(rng):
    h = Histogram(200_000, {})
    y = hg.naive_release(h, NaiveHistState(), 0.5, -np.inf, 1.0, rng)
    assert y.var() == pytest.approx(1.0, rel=0.01)


def test_naive_two_rounds_variance(rng):
    h = Histogram(200_000, {})
    st_ = NaiveHistState()
    y1 = hg.naive_release(h, st_, 0.5, -np.inf, 1.0, rng)
    y2 = hg.naive_release(h, st_, 2.0, -np.inf, 1.0, rng)
    assert y1.var() == pytest.approx(1.0, rel=0.01)
    assert y2.var() == pytest.approx(0.25, rel=0.01)
    # the two rounds share noise: Cov = 1/(2 * 2)
    assert np.cov(y1, y2)[0, 1] == pytest.approx(0.25, abs=0.005)


def test_naive_rejects_non_increasing(rng):
    st_ = NaiveHistState()
    h = Histogram(3, {0: 1})
    hg.naive_release(h, st_, 1.0, 0.0, 1.0, rng)
    with pytest.raises(hg.GradualOrderError):
        hg.naive_release(h, st_, 1.0, 0.0, 1.0, rng)


def test_crossing_probability_first_round():
    p = hg.crossing_probability(1, [0.5], [2.0], 1.0)
    assert p == pytest.approx(stats.norm.sf(1 / math.sqrt(0.25)), rel=1e-12)
    assert p == pytest.approx(0.02275, abs=1e-5)
    # unscaled form: Pr[N(0, 1/(2 rho)) > tau]
    assert p == pytest.approx(stats.norm.sf(2.0 / math.sqrt(1.0)), rel=1e-12)
    assert hg.crossing_probability(1, [0.5], [-1e6], 1.0) == pytest.approx(1.0)


@pytest.mark.parametrize("r", [2, 3])
def test_crossing_probability_matches_mc(r, rng):
    p = hg.crossing_probability(r, BUDGETS, THRESHOLDS, 1.0)
    p_mc, se = crossing_probability_mc(r, BUDGETS, THRESHOLDS, 1.0, 2_000_000, rng)
    assert abs(p - p_mc) < 3 * se


def test_exact_path_matches_conditional_law(rng):
    for r, n in ((2, 20_000), (3, 2_000)):
        ref = conditional_sums_mc(r, n, rng)
        got = hg.sample_first_crossing(r, BUDGETS, THRESHOLDS, 1.0, n, rng)
        assert np.all(got > BUDGETS[r - 1] * THRESHOLDS[r - 1])
        assert stats.ks_2samp(ref, got).pvalue > 0.001


def test_sequential_path_is_biased(rng):
    # truncating each step on the past alone ignores the future crossing
    ref = conditional_sums_mc(2, 30_000, rng)
    seq = hg.sample_first_crossing(2, BUDGETS, THRESHOLDS, 1.0, 30_000, rng, path="sequential")
    assert stats.ks_2samp(ref, seq).pvalue < 1e-4


def test_draw_counter_is_k_plus_c_times_m(rng):
    h = Histogram(100, {3: 5, 17: 3, 42: 2, 60: 1, 99: 8})
    for _ in range(20):
        s = EffHistState()
        for rho, tau in zip(BUDGETS, THRESHOLDS):
            hg.efficient_release(h, s, rho, tau, 1.0, rng)
        assert s.draws == (h.k + s.activated) * len(BUDGETS)


def test_large_domain_single_round(rng):
    d = 10**6
    h = Histogram(d, {0: 10, 1: 20, 2: 30})
    p = hg.crossing_probability(1, [0.5], [2.0], 1.0)
    qs = []
    for _ in range(30):
        s = EffHistState()
        out = hg.efficient_release(h, s, 0.5, 2.0, 1.0, rng)
        assert s.draws == h.k + s.activated
        assert {0, 1, 2} <= set(out)
        qs.append(s.activated)
    mean_q = (d - 3) * p
    assert abs(np.mean(qs) - mean_q) < 4 * math.sqrt(mean_q * (1 - p) / len(qs))


def test_full_domain_has_no_binomial_stage(rng):
    h = Histogram(4, {0: 1, 1: 2, 2: 3, 3: 4})
    s = EffHistState()
    hg.efficient_release(h, s, 1.0, 0.0, 1.0, rng)
    assert s.activated == 0 and s.draws == 4


def test_released_values_exceed_threshold(rng):
    h = Histogram(1000, {5: 4})
    s = EffHistState()
    for rho, tau in zip(BUDGETS, THRESHOLDS):
        out = hg.efficient_release(h, s, rho, tau, 1.0, rng)
        assert all(v > tau for v in out.values())
        assert list(out) == sorted(out)


def test_static_threshold_expected_support(rng):
    h = Histogram(50, {0: 10, 1: 10})
    sizes = [
        len(set(hg.static_threshold_simulate(h, 1.0, stats.norm(), rng)) - h.support)
        for _ in range(4000)
    ]
    expected = 48 * stats.norm.sf(1)
    assert expected == pytest.approx(7.62, abs=0.01)
    assert abs(np.mean(sizes) - expected) < 4 * math.sqrt(48 * 0.1587 * 0.8413 / 4000)


def test_static_threshold_huge_tau(rng):
    h = Histogram(50, {0: 10, 1: 10})
    out = hg.static_threshold_simulate(h, 1e6, stats.norm(), rng)
    assert out == {}


@settings(max_examples=20, deadline=None)
@given(
    st.lists(st.floats(0.05, 2.0), min_size=1, max_size=3),
    st.lists(st.floats(-2.0, 5.0), min_size=3, max_size=3),
)
def test_crossing_probability_is_a_probability(increments, taus):
    budgets = np.cumsum(increments).tolist()
    for r in range(1, len(budgets) + 1):
        p = hg.crossing_probability(r, budgets, taus[: len(budgets)], 1.0)
        assert 0.0 <= p <= 1.0
