import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from survscreen.numerics import (
    NotPositiveDefiniteError,
    chi_square_sf,
    cholesky,
    derive_stream,
    equicorrelation,
    regularized_beta,
    regularized_gamma_q,
    sample_mvn,
    std_normal_cdf,
    std_normal_sf,
    student_t_sf,
    two_sided_normal_pvalue,
    two_sided_t_pvalue,
)

mpmath.mp.dps = 40


def test_stream_is_reproducible():
    a = derive_stream(42, 0, 0).random(100)
    b = derive_stream(42, 0, 0).random(100)
    assert np.array_equal(a, b)


def test_neighbouring_streams_differ():
    a = derive_stream(42, 0, 0).random(100)
    b = derive_stream(42, 0, 1).random(100)
    c = derive_stream(42, 1, 0).random(100)
    assert not np.any(a == b)
    assert not np.any(a == c)


def test_stream_state_is_at_least_128_bits():
    bg = derive_stream(1, 2, 3).bit_generator
    assert bg.state["bit_generator"] == "Philox"
    assert len(bg.state["state"]["key"]) * 64 >= 128


def test_stream_rejects_negative_keys():
    with pytest.raises(ValueError):
        derive_stream(-1, 0, 0)


def test_cholesky_identity():
    assert np.array_equal(cholesky(np.eye(3)).lower, np.eye(3))


def test_cholesky_equicorrelated_pair():
    L = cholesky(equicorrelation(2, 0.8)).lower
    np.testing.assert_allclose(L, [[1.0, 0.0], [0.8, 0.6]], atol=1e-15)
    np.testing.assert_allclose(L @ L.T, equicorrelation(2, 0.8), atol=1e-15)


def test_cholesky_rejects_indefinite():
    with pytest.raises(NotPositiveDefiniteError) as info:
        cholesky([[1.0, 1.5], [1.5, 1.0]])
    assert info.value.pivot == 1
    assert isinstance(info.value, np.linalg.LinAlgError)


def test_cholesky_rejects_asymmetric():
    with pytest.raises(ValueError):
        cholesky([[1.0, 0.2], [0.3, 1.0]])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_cholesky_reconstructs_random_spd(seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((10, 10))
    C = A @ A.T + 0.5 * np.eye(10)
    L = cholesky(C).lower
    assert np.all(np.diag(L) > 0)
    assert np.allclose(np.triu(L, 1), 0.0)
    np.testing.assert_allclose(L @ L.T, C, rtol=0, atol=1e-10)


def test_mvn_univariate_moments():
    x = sample_mvn(derive_stream(1, 0, 0), cholesky([[1.0]]), 10**5)
    assert x.shape == (10**5, 1)
    assert abs(x.mean()) < 0.02
    assert abs(x.var() - 1.0) < 0.03


def test_mvn_correlation():
    x = sample_mvn(derive_stream(1, 0, 1), cholesky(equicorrelation(2, 0.8)), 10**5)
    assert abs(np.corrcoef(x.T)[0, 1] - 0.8) < 0.01


def test_mvn_single_row():
    x = sample_mvn(derive_stream(1, 0, 2), cholesky(equicorrelation(4, 0.3)), 1)
    assert x.shape == (1, 4) and np.all(np.isfinite(x))


def test_mvn_covariance_within_three_standard_errors():
    target = equicorrelation(3, 0.5) * np.array([1.0, 2.0, 3.0])[:, None] * np.array([1.0, 2.0, 3.0])
    n = 10**5
    x = sample_mvn(derive_stream(9, 9, 9), cholesky(target), n)
    emp = np.cov(x.T, bias=True)
    # Var of a sample covariance entry: (S_ii S_jj + S_ij^2) / n
    se = np.sqrt((np.outer(np.diag(target), np.diag(target)) + target**2) / n)
    assert np.all(np.abs(emp - target) < 3 * se)


def test_normal_cdf_values():
    assert std_normal_cdf(0.0) == 0.5
    assert abs(std_normal_cdf(1.959963985) - 0.975) < 1e-9
    assert 0.0 <= std_normal_cdf(-40.0) < 1e-300


@given(st.floats(-40, 40))
def test_normal_cdf_symmetry(x):
    assert abs(std_normal_cdf(x) + std_normal_cdf(-x) - 1.0) < 1e-12


@given(st.floats(-38, 38))
def test_normal_sf_against_mpmath(x):
    exact = float(mpmath.ncdf(-x))
    assert abs(std_normal_sf(x) - exact) <= 1e-15 + 1e-14 * exact


def test_chi_square_fixed_points():
    for df in (1, 2, 3, 7, 40):
        assert chi_square_sf(0.0, df) == 1.0
    assert abs(chi_square_sf(3.841458821, 1) - 0.05) < 1e-8
    for t in (0.1, 1.0, 5.5, 30.0):
        assert chi_square_sf(t, 2) == math.exp(-t / 2)


@pytest.mark.parametrize("df", [1, 2, 3, 4, 5, 10, 25, 100])
def test_chi_square_against_mpmath(df):
    for x in np.concatenate([np.linspace(0.01, 5 * df + 40, 60), [1e-8, 0.5 * df, df, df + 1]]):
        exact = float(mpmath.gammainc(df / 2, x / 2, mpmath.inf, regularized=True))
        assert abs(chi_square_sf(float(x), df) - exact) < 1e-12


@pytest.mark.parametrize("df", [1, 2, 3, 6, 15])
def test_chi_square_strictly_decreasing(df):
    grid = np.linspace(0.0, 60.0, 600)
    vals = [chi_square_sf(float(x), df) for x in grid]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_chi_square_rejects_bad_input():
    with pytest.raises(ValueError):
        chi_square_sf(-1.0, 1)
    with pytest.raises(ValueError):
        chi_square_sf(1.0, 0)


def test_chi_square_underflows_to_zero():
    assert chi_square_sf(2000.0, 1) == 0.0
    assert chi_square_sf(2000.0, 5) == 0.0


@pytest.mark.parametrize("a", [0.3, 1.0, 2.5, 10.0, 120.0])
def test_gamma_q_against_mpmath(a):
    for x in (0.001, 0.5, a, a + 1, 2 * a + 5, 10 * a + 30):
        exact = float(mpmath.gammainc(a, x, mpmath.inf, regularized=True))
        assert abs(regularized_gamma_q(a, x) - exact) < 1e-12


@pytest.mark.parametrize("a,b", [(0.5, 0.5), (2.0, 3.0), (0.5, 40.0), (500.0, 0.5), (30.0, 70.0)])
def test_incomplete_beta_against_mpmath(a, b):
    for x in (1e-6, 0.01, 0.3, 0.5, 0.9, 0.999):
        exact = float(mpmath.betainc(a, b, 0, x, regularized=True))
        assert abs(regularized_beta(a, b, x) - exact) < 1e-12


def test_t_tail_fixed_points():
    assert student_t_sf(0.0, 5) == 0.5
    assert abs(student_t_sf(1.0, 1) - 0.25) < 1e-10
    # Cauchy closed form
    for t in (0.3, 2.0, 17.0):
        assert abs(student_t_sf(t, 1) - (0.5 - math.atan(t) / math.pi)) < 1e-12
    assert abs(student_t_sf(1.959963985, 10**6) - 0.025) < 1e-5


@settings(max_examples=200, deadline=None)
@given(st.floats(-60, 60), st.sampled_from([1, 2, 3, 5, 10, 47, 497, 997, 4997, 10**6]))
def test_t_tail_against_mpmath(t, df):
    x = mpmath.mpf(df) / (df + mpmath.mpf(t) ** 2)
    tail = mpmath.betainc(mpmath.mpf(df) / 2, mpmath.mpf(1) / 2, 0, x, regularized=True) / 2
    exact = float(tail if t > 0 else 1 - tail)
    assert abs(student_t_sf(t, df) - exact) < 1e-12


def test_t_tail_matches_scipy_far_tail():
    for df in (50, 997, 4997):
        for t in (8.0, 20.0, 35.0):
            ref = stats.t.sf(t, df)
            assert math.isclose(student_t_sf(t, df), ref, rel_tol=1e-9, abs_tol=1e-300)


def test_two_sided_helpers():
    assert two_sided_t_pvalue(0.0, 10) == 1.0
    assert abs(two_sided_normal_pvalue(1.959963985) - 0.05) < 1e-9
    assert two_sided_normal_pvalue(-3.0) == two_sided_normal_pvalue(3.0)
    assert two_sided_normal_pvalue(60.0) == 0.0
