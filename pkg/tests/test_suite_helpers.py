import numpy as np
import pytest

from lossless_release.suite import chi2_two_sample, holm_passes


def test_holm_examples():
    assert holm_passes([0.5, 0.02, 0.3])
    assert not holm_passes([0.001, 0.5])
    # 0.004 survives the first step (0.01 / 2) only because it is the smallest
    assert not holm_passes([0.004, 0.006])
    assert holm_passes([0.006, 0.5])
    assert holm_passes([])


def test_chi2_identical_samples():
    a = np.array([0, 1, 1, 2, 3, 3, 3] * 50)
    assert chi2_two_sample(a, a.copy()) == pytest.approx(1.0)


def test_chi2_detects_shift():
    rng = np.random.default_rng(0)
    assert chi2_two_sample(rng.poisson(3, 20_000), rng.poisson(3.2, 20_000)) < 1e-6


def test_chi2_null_is_roughly_uniform():
    rng = np.random.default_rng(1)
    pv = np.array([chi2_two_sample(rng.poisson(4, 2000), rng.poisson(4, 2000)) for _ in range(300)])
    assert 0.02 < np.mean(pv < 0.1) < 0.2
