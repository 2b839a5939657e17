import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mpc_bounds.specfn import (
    BESSEL_UNIFORM_FLOOR,
    RegimeError,
    RngStream,
    log_bessel_i,
    log_bessel_i_reference,
    log_bessel_i_uniform,
    log_gamma,
    sample_noncentral_chisq,
    std_normal_cdf,
    std_normal_quantile,
)


def mp_log_bessel(nu, x):
    with mpmath.workdps(40):
        return float(mpmath.log(mpmath.besseli(nu, x)))


# -- normal cdf / quantile ----------------------------------------------------


def test_cdf_at_zero_and_saturation():
    assert std_normal_cdf(0.0) == 0.5
    assert std_normal_cdf(40.0) == 1.0
    assert std_normal_cdf(-40.0) >= 0.0


def test_cdf_matches_erf_oracle():
    with mpmath.workdps(30):
        ref = float(0.5 * (1 + mpmath.erf(1 / mpmath.sqrt(2))))
    assert abs(std_normal_cdf(1.0) - ref) <= 1e-14


@given(st.floats(-8, 8))
def test_cdf_symmetry(x):
    assert abs(std_normal_cdf(x) + std_normal_cdf(-x) - 1.0) <= 1e-15


@given(st.floats(-10, 10), st.floats(-10, 10))
def test_cdf_lipschitz(a, b):
    assert abs(std_normal_cdf(a) - std_normal_cdf(b)) <= abs(a - b) / math.sqrt(2 * math.pi) + 1e-16


def test_quantile_center_and_bisection_oracle():
    assert std_normal_quantile(0.5) == 0.0
    lo, hi = 0.0, 5.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if std_normal_cdf(mid) < 0.975:
            lo = mid
        else:
            hi = mid
    assert abs(std_normal_quantile(0.975) - 0.5 * (lo + hi)) <= 1e-10


@given(st.floats(1e-9, 1 - 1e-9))
def test_quantile_round_trip(p):
    assert abs(std_normal_cdf(std_normal_quantile(p)) - p) <= 1e-12


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5])
def test_quantile_domain(p):
    with pytest.raises(ValueError):
        std_normal_quantile(p)


# -- log gamma ----------------------------------------------------------------


def test_log_gamma_simple_values():
    assert abs(log_gamma(1.0)) < 1e-15
    assert abs(log_gamma(0.5) - 0.5 * math.log(math.pi)) < 1e-15


def test_log_gamma_stirling_oracle():
    # Stirling series with eight Bernoulli corrections after shifting x up by 10
    x = 10.3
    y = x + 10
    series = (y - 0.5) * math.log(y) - y + 0.5 * math.log(2 * math.pi)
    bern = [1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66, -691 / 2730, 7 / 6, -3617 / 510]
    for k, b in enumerate(bern, start=1):
        series += b / (2 * k * (2 * k - 1) * y ** (2 * k - 1))
    series -= sum(math.log(x + j) for j in range(10))
    assert abs(log_gamma(x) - series) <= 1e-10


@given(st.floats(0.01, 500))
def test_log_gamma_recurrence(x):
    assert abs(log_gamma(x + 1) - log_gamma(x) - math.log(x)) <= 1e-12 * max(1.0, abs(log_gamma(x + 1)))


def test_log_gamma_domain():
    with pytest.raises(ValueError):
        log_gamma(0.0)
    with pytest.raises(ValueError):
        log_gamma(-2.5)


# -- Bessel -------------------------------------------------------------------


def test_uniform_bessel_nu50_z2():
    ref = mp_log_bessel(50, 100)
    assert abs(log_bessel_i_uniform(50, 2.0) - ref) / abs(ref) <= 1e-6


def test_uniform_bessel_nu200_z1():
    ref = mp_log_bessel(200, 200)
    assert abs(log_bessel_i_uniform(200, 1.0) - ref) / abs(ref) <= 1e-8


def test_uniform_bessel_grid():
    worst = 0.0
    for nu in (25, 50, 100, 400):
        for z in np.linspace(0.5, 4.0, 50):
            ref = mp_log_bessel(nu, nu * z)
            worst = max(worst, abs(log_bessel_i_uniform(nu, z) - ref) / abs(ref))
    assert worst <= 1e-5


@given(st.floats(25, 2000), st.floats(0.05, 20), st.floats(1.001, 2))
def test_uniform_bessel_increasing_in_z(nu, z, factor):
    assert log_bessel_i_uniform(nu, z * factor) > log_bessel_i_uniform(nu, z)


def test_uniform_bessel_regime_error():
    with pytest.raises(RegimeError):
        log_bessel_i_uniform(10.0, 1.0)


@pytest.mark.parametrize("nu,x", [(0.0, 0.3), (4.0, 2.0), (12.5, 40.0), (24.0, 900.0), (3.0, 1e-6)])
def test_reference_bessel_against_mpmath(nu, x):
    assert abs(log_bessel_i_reference(nu, x) - mp_log_bessel(nu, x)) <= 1e-12 * max(1.0, abs(mp_log_bessel(nu, x)))


def test_dispatcher_picks_evaluator():
    assert log_bessel_i(30.0, 45.0) == log_bessel_i_uniform(30.0, 1.5)
    assert log_bessel_i(5.0, 7.0) == log_bessel_i_reference(5.0, 7.0)


def test_evaluators_agree_at_floor():
    nu = BESSEL_UNIFORM_FLOOR
    for x in (12.5, 50.0, 100.0):
        a, b = log_bessel_i_uniform(nu, x / nu), log_bessel_i_reference(nu, x)
        assert abs(a - b) / abs(b) <= 1e-6


# -- random streams and chi-square --------------------------------------------


def test_rng_stream_reproducible():
    a = RngStream(123, 4).generator().standard_normal(10)
    b = RngStream(123, 4).generator().standard_normal(10)
    c = RngStream(123, 5).generator().standard_normal(10)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_rng_children_distinct_and_stable():
    root = RngStream(9)
    ids = [root.child(i).stream_id for i in range(50)]
    assert len(set(ids)) == 50
    assert ids == [RngStream(9).child(i).stream_id for i in range(50)]


def test_rng_child_streams_uncorrelated():
    root = RngStream(1)
    x = root.child(0).generator().standard_normal(200_000)
    y = root.child(1).generator().standard_normal(200_000)
    assert abs(np.corrcoef(x, y)[0, 1]) < 4 / math.sqrt(200_000)


@pytest.mark.parametrize("seed", [-1, 2**64])
def test_rng_seed_range(seed):
    with pytest.raises(ValueError):
        RngStream(seed)


def test_central_chisq_moments():
    x = sample_noncentral_chisq(5, 0.0, RngStream(3), size=1_000_000)
    assert abs(x.mean() - 5) <= 4 * math.sqrt(10 / 1e6)
    # variance of the sample variance for chi2_5 is (mu4 - sigma^4)/m with mu4 = 12*5*(5+4)=540
    assert abs(x.var() - 10) <= 4 * math.sqrt((540 - 100) / 1e6)


def test_noncentral_chisq_mean():
    n, N, s, g = 400, 1.0, 1.3, 1.0
    lam = n * N * s / g**2
    x = sample_noncentral_chisq(n, lam, RngStream(8), size=1_000_000)
    sd = math.sqrt(2 * (n + 2 * lam))
    assert abs(x.mean() - n * (g**2 + N * s) / g**2) <= 4 * sd / 1000


def test_chisq_one_dof_is_square_of_normal():
    z = RngStream(77).generator().standard_normal(20)
    x = sample_noncentral_chisq(1, 0.0, RngStream(77), size=20)
    assert np.array_equal(x, z * z)


def test_chisq_validation():
    with pytest.raises(ValueError):
        sample_noncentral_chisq(0, 1.0, RngStream(1))
    with pytest.raises(ValueError):
        sample_noncentral_chisq(3, -1.0, RngStream(1))
    with pytest.raises(TypeError):
        sample_noncentral_chisq(3, 1.0, 42)
