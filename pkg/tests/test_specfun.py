import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from vsd.specfun import (
    MLSeriesConfig,
    _ml_asymptotic,
    _ml_series,
    digamma_fn,
    gamma_fn,
    log_gamma,
    mittag_leffler,
    mittag_leffler_vec,
)


def ml_oracle(alpha, beta, z, terms=20000, dps=None):
    """Extended-precision power series."""
    if dps is None:
        # the largest term is about exp(|z|^(1/alpha))
        dps = 40 + int(abs(z) ** (1.0 / alpha) / 2.3)
    with mpmath.workdps(dps):
        a, b, zz = mpmath.mpf(alpha), mpmath.mpf(beta), mpmath.mpf(z)
        s = mpmath.mpf(0)
        for k in range(terms):
            term = zz**k * mpmath.rgamma(a * k + b)
            s += term
            if k > 20 and abs(term) < mpmath.mpf(10) ** (-40):
                break
        return float(s)


# ---- Gamma -----------------------------------------------------------------


@pytest.mark.parametrize("x, expected", [(1.0, 1.0), (0.5, math.sqrt(math.pi)), (5.0, 24.0)])
def test_gamma_examples(x, expected):
    assert gamma_fn(x) == pytest.approx(expected, rel=1e-13)


def test_gamma_relative_accuracy_on_range():
    xs = np.linspace(0.1, 30.0, 997)
    ref = np.array([float(mpmath.gamma(mpmath.mpf(x))) for x in xs])
    assert np.max(np.abs(gamma_fn(xs) / ref - 1.0)) <= 1e-12


def test_gamma_negative_nonintegers():
    for x in (-0.5, -1.5, -2.25):
        assert gamma_fn(x) == pytest.approx(float(mpmath.gamma(x)), rel=1e-12)


@pytest.mark.parametrize("x", [0.0, -1.0, -2.0, -7.0])
def test_gamma_poles_raise(x):
    with pytest.raises(ValueError):
        gamma_fn(x)


@given(st.floats(0.5, 10.0))
def test_gamma_recurrence(x):
    assert abs(gamma_fn(x + 1.0) / gamma_fn(x) - x) <= 1e-11


def test_log_gamma_matches_gamma():
    xs = np.linspace(0.2, 25.0, 50)
    assert np.allclose(log_gamma(xs), np.log(gamma_fn(xs)), rtol=0, atol=1e-12)


# ---- digamma ---------------------------------------------------------------


def test_digamma_examples():
    euler = 0.5772156649015329
    assert digamma_fn(1.0) == pytest.approx(-euler, abs=1e-12)
    assert digamma_fn(2.0) == pytest.approx(1.0 - euler, abs=1e-12)


def test_digamma_relative_accuracy():
    xs = np.linspace(0.1, 30.0, 301)
    ref = np.array([float(mpmath.digamma(mpmath.mpf(x))) for x in xs])
    mask = np.abs(ref) > 1e-3  # relative error is meaningless at the root near 1.4616
    assert np.max(np.abs(digamma_fn(xs)[mask] / ref[mask] - 1.0)) <= 1e-10
    assert np.max(np.abs(digamma_fn(xs) - ref)) <= 1e-12


@given(st.floats(0.1, 50.0))
def test_digamma_recurrence(x):
    assert abs(digamma_fn(x + 1.0) - digamma_fn(x) - 1.0 / x) <= 1e-12


@pytest.mark.parametrize("x", [0.0, -0.5, -3.0])
def test_digamma_domain(x):
    with pytest.raises(ValueError):
        digamma_fn(x)


# ---- Mittag-Leffler --------------------------------------------------------


def test_ml_reduces_to_exponential():
    assert mittag_leffler(1.0, 1.0, -1.0) == pytest.approx(0.3678794412, abs=1e-10)


@pytest.mark.parametrize("alpha, beta", [(0.3, 1.0), (0.5, 0.5), (0.75, 2.0)])
def test_ml_at_zero(alpha, beta):
    assert mittag_leffler(alpha, beta, 0.0) == pytest.approx(1.0 / gamma_fn(beta), rel=1e-14)


def test_ml_half_against_extended_precision_series():
    assert abs(mittag_leffler(0.5, 1.0, -1.0) - ml_oracle(0.5, 1.0, -1.0, terms=500)) <= 1e-12


@pytest.mark.parametrize("x", [1e-3, 0.1, 1.0, 2.0, 5.0, 10.0, 31.6, 100.0, 1e3, 1e4])
def test_ml_half_is_erfcx(x):
    # E_{1/2,1}(-x) = exp(x^2) erfc(x)
    assert abs(mittag_leffler(0.5, 1.0, -x) - special.erfcx(x)) <= 1e-8


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7, 0.9])
@pytest.mark.parametrize("beta", [1.0, None])
def test_ml_absolute_accuracy(alpha, beta):
    beta = alpha if beta is None else beta
    # keep the oracle affordable: its largest term is about exp(|z|^(1/alpha))
    zs = [z for z in (-0.5, -2.0, -4.9, -5.1, -8.0, -12.0) if abs(z) ** (1.0 / alpha) <= 300.0]
    for z in zs:
        assert abs(mittag_leffler(alpha, beta, z) - ml_oracle(alpha, beta, z)) <= 1e-8, z


@pytest.mark.parametrize("alpha", [0.3, 0.6, 0.9])
def test_ml_large_argument_asymptotics(alpha):
    # for |z| >= 1e3 a few asymptotic terms are exact to well below 1e-8
    for z in (-1e3, -1e4):
        ref = -sum(z ** (-k) / float(mpmath.gamma(1.0 - alpha * k)) for k in range(1, 6) if (1.0 - alpha * k) % 1)
        assert abs(mittag_leffler(alpha, 1.0, z) - ref) <= 1e-8


@pytest.mark.parametrize("alpha", [0.4, 0.5, 0.75])
def test_ml_completely_monotone_range(alpha):
    z = -np.linspace(0.0, 50.0, 401)
    v = mittag_leffler_vec(alpha, 1.0, z)
    assert np.all(v > 0.0)
    assert np.all(v <= 1.0)
    assert np.all(np.diff(v) <= 1e-15)


def test_ml_branch_overlap():
    # both branches carry their own error estimate below 1e-7 here
    for z in (-7.5, -8.0, -8.5):
        s, es = _ml_series(0.75, 1.0, z, 120)
        a, ea = _ml_asymptotic(0.75, 1.0, z, 10)
        assert abs(s - a) <= 2e-7


@settings(max_examples=30, deadline=None)
@given(st.floats(0.3, 0.9), st.floats(0.0, 60.0))
def test_ml_bounded_by_one(alpha, x):
    v = mittag_leffler(alpha, 1.0, -x)
    assert 0.0 < v <= 1.0


@pytest.mark.parametrize(
    "args", [(0.0, 1.0, -1.0), (1.2, 1.0, -1.0), (0.5, 0.0, -1.0), (0.5, 1.0, 0.5)]
)
def test_ml_domain_errors(args):
    with pytest.raises(ValueError):
        mittag_leffler(*args)


def test_ml_config_validation():
    with pytest.raises(ValueError):
        MLSeriesConfig(series_terms=10)
    with pytest.raises(ValueError):
        MLSeriesConfig(tolerance=0.0)
