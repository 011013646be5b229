import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import integrate, optimize

from sparsetune import FAR, FixedRho, OracleK, far_to_lambda, hard_threshold, robust_sigma, soft_threshold
from sparsetune.exceptions import ConfigError, DegenerateThresholdError
from sparsetune.thresholding import (
    SINGLE,
    TST_STAGE1,
    TST_STAGE2,
    keep_count,
    keep_largest,
    policy_from_dict,
    select_threshold,
)

vectors = arrays(np.float64, st.integers(1, 40), elements=st.floats(-1e3, 1e3))


def lambda_oracle(far):
    # two-sided tail mass of the standard normal density, by quadrature
    pdf = lambda z: np.exp(-z * z / 2) / np.sqrt(2 * np.pi)
    tail = lambda lam: 2 * integrate.quad(pdf, lam, np.inf, epsabs=1e-14, epsrel=1e-13)[0]
    return optimize.brentq(lambda lam: tail(lam) - far, 0.0, 40.0, xtol=1e-14)


def test_soft_and_hard_examples():
    v = np.array([3.0, -0.5, -2.0])
    np.testing.assert_array_equal(soft_threshold(v, 1), [2, 0, -1])
    np.testing.assert_array_equal(soft_threshold(v, 0), v)
    np.testing.assert_array_equal(hard_threshold(v, 1), [3, 0, -2])
    np.testing.assert_array_equal(hard_threshold(np.array([1.0, -1.0]), 1), [0, 0])


@given(vectors, st.floats(0, 1e3))
@settings(max_examples=100, deadline=None)
def test_threshold_properties(v, t):
    for eta in (soft_threshold, hard_threshold):
        np.testing.assert_array_equal(eta(-v, t), -eta(v, t))
    assert np.linalg.norm(soft_threshold(v, t)) <= np.linalg.norm(v) + 1e-12
    h = hard_threshold(v, t)
    np.testing.assert_array_equal(hard_threshold(h, t), h)


@given(vectors)
@settings(max_examples=50, deadline=None)
def test_soft_threshold_monotone_in_t(v):
    prev = np.abs(v)
    for t in np.linspace(0, 1e3, 25):
        cur = np.abs(soft_threshold(v, t))
        assert np.all(cur <= prev + 1e-12)
        prev = cur


@pytest.mark.parametrize("far", [1e-4, 1e-3, 0.0455, 0.015, 0.1, 0.2, 0.5, 0.9])
def test_far_to_lambda_matches_quadrature(far):
    assert abs(far_to_lambda(far) - lambda_oracle(far)) <= 1e-6


def test_far_to_lambda_examples_and_domain():
    assert far_to_lambda(0.0455) == pytest.approx(2.000, abs=1e-3)
    assert far_to_lambda(0.015) == pytest.approx(2.432, abs=1e-3)
    assert far_to_lambda(1.0) == 0.0
    assert far_to_lambda(1 - 1e-9) < 1e-8
    for bad in (0.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            far_to_lambda(bad)


def test_robust_sigma():
    rng = np.random.default_rng(0)
    assert robust_sigma(np.full(10, 3.0)) == 0.0
    assert robust_sigma(rng.standard_normal(10**5)) == pytest.approx(1.0, abs=0.02)
    z = rng.standard_normal(10**5)
    out = rng.random(10**5) < 0.05
    z[out] = 100 * rng.choice([-1, 1], size=out.sum())
    assert robust_sigma(z) == pytest.approx(1.0, abs=0.1)


def test_select_threshold_examples():
    c = np.arange(100, 0, -1, dtype=float)
    pol = FixedRho(0.33)
    t = select_threshold(pol, TST_STAGE1, c, 100)
    assert np.count_nonzero(hard_threshold(c, t)) == 33

    pol = OracleK(2, 1, 2)
    c = np.array([5.0, 4.0, 3.0, 2.0, 1.0])
    assert keep_count(pol, TST_STAGE2, 5) == 4
    t = select_threshold(pol, TST_STAGE2, c, 5)
    assert t == 1.0
    np.testing.assert_array_equal(np.flatnonzero(hard_threshold(c, t)), [0, 1, 2, 3])

    z = np.random.default_rng(1).standard_normal(10**5)
    assert select_threshold(FAR(0.5), SINGLE, z, 100) == pytest.approx(0.674, abs=0.02)


def test_select_threshold_uses_noise_scale():
    c = np.r_[np.full(10, 50.0), np.zeros(90)]
    noise = np.random.default_rng(2).standard_normal(100)
    t = select_threshold(FAR(0.05), SINGLE, c, 50, noise=noise)
    assert t == pytest.approx(far_to_lambda(0.05) * robust_sigma(noise))


def test_degenerate_keep_count():
    with pytest.raises(DegenerateThresholdError):
        select_threshold(OracleK(5), SINGLE, np.ones(5), 10)
    with pytest.raises(DegenerateThresholdError):
        select_threshold(FixedRho(0.01), SINGLE, np.ones(50), 10)


def test_keep_largest_tie_break():
    v = np.array([1.0, -3.0, 3.0, 2.0, -2.0])
    np.testing.assert_array_equal(keep_largest(v, 2), [0, -3, 3, 0, 0])
    np.testing.assert_array_equal(keep_largest(v, 3), [0, -3, 3, 2, 0])


@given(arrays(np.float64, 30, elements=st.floats(-10, 10)), st.integers(1, 29))
@settings(max_examples=50, deadline=None)
def test_keep_largest_count(v, m):
    assert np.count_nonzero(keep_largest(v, m)) <= m
    if np.count_nonzero(v) >= m:
        assert np.count_nonzero(keep_largest(v, m)) == m


def test_policy_validation_and_round_trip():
    for pol in (FAR(0.2), OracleK(3, 1, 2), OracleK(), FixedRho(0.3, 1, 1)):
        assert policy_from_dict(pol.to_dict()) == pol
    with pytest.raises(ConfigError):
        FAR(0.0)
    with pytest.raises(ConfigError):
        FixedRho(1.2)
    with pytest.raises(ConfigError):
        OracleK(2, alpha=0.5)
    with pytest.raises(ConfigError):
        policy_from_dict({"type": "Nope"})
