import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from gevqmc.betagauss import BetaGaussian, DivergenceError, QuadratureSpec, gamma_pq, quad_oracle

BETAS = [0.5, 1.0, 2.0, 4.0]


@pytest.mark.parametrize("beta", BETAS)
def test_density_integrates_to_one(beta):
    d = BetaGaussian(beta)
    total = quad_oracle(d.density)
    assert abs(total - 1.0) < 1e-10


def test_special_cases():
    np.testing.assert_allclose(BetaGaussian(2.0).c_beta, 1 / math.sqrt(2 * math.pi), rtol=1e-15)
    np.testing.assert_allclose(BetaGaussian(1.0).c_beta, 0.5, rtol=1e-15)
    # standard normal quantile
    assert abs(BetaGaussian(2.0).inv_cdf(0.975) - 1.959963984540054) < 1e-12
    # Laplace law: cdf(-1) = exp(-1)/2
    assert abs(BetaGaussian(1.0).cdf(-1.0) - 0.5 * math.exp(-1.0)) < 1e-15


@pytest.mark.parametrize("a", [0.25, 0.5, 1.0, 2.0, 4.0])
def test_gamma_pq_against_scipy(a):
    x = np.concatenate([np.linspace(1e-6, 3, 50), np.geomspace(3, 200, 50)])
    log_p, log_q = gamma_pq(a, x)
    np.testing.assert_allclose(np.exp(log_p), special.gammainc(a, x), rtol=1e-13, atol=1e-300)
    q = special.gammaincc(a, x)
    pos = q > 1e-300
    np.testing.assert_allclose(np.exp(log_q[pos]), q[pos], rtol=1e-12)


@pytest.mark.parametrize("beta", BETAS)
def test_cdf_against_quadrature(beta):
    d = BetaGaussian(beta)
    for y in (-3.0, -0.7, 0.2, 1.5):
        ref, _ = integrate.quad(d.density, -np.inf, y, epsabs=1e-14, epsrel=1e-13)
        assert abs(d.cdf(y) - ref) < 1e-12


@pytest.mark.parametrize("beta", BETAS)
def test_inverse_roundtrip_grid(beta):
    d = BetaGaussian(beta)
    t = (np.arange(1, 1001) - 0.5) / 1000
    assert np.max(np.abs(d.cdf(d.inv_cdf(t)) - t)) <= 1e-10


@pytest.mark.parametrize("beta", BETAS)
def test_inverse_deep_tails(beta):
    d = BetaGaussian(beta)
    t = np.array([1e-300, 1e-200, 1e-50, 1e-10])
    y = d.inv_cdf(t)
    assert np.all(np.isfinite(y)) and np.all(np.diff(y) > 0)
    np.testing.assert_allclose(d.cdf(y), t, rtol=1e-9)
    # symmetry
    np.testing.assert_allclose(d.inv_cdf(1 - 1e-10), -d.inv_cdf(1e-10), rtol=1e-5)


def test_inverse_rejects_endpoints():
    with pytest.raises(ValueError):
        BetaGaussian(1.0).inv_cdf(0.0)
    with pytest.raises(ValueError):
        BetaGaussian(1.0).inv_cdf(1.0)


@settings(max_examples=60, deadline=None)
@given(beta=st.floats(0.3, 6.0), t=st.floats(1e-12, 1 - 1e-12))
def test_roundtrip_property(beta, t):
    d = BetaGaussian(beta)
    assert abs(d.cdf(d.inv_cdf(t)) - t) <= 1e-10


@settings(max_examples=40, deadline=None)
@given(beta=st.floats(0.3, 6.0), a=st.floats(-5, 5), b=st.floats(-5, 5))
def test_cdf_monotone_property(beta, a, b):
    d = BetaGaussian(beta)
    lo, hi = min(a, b), max(a, b)
    assert d.cdf(lo) <= d.cdf(hi) + 1e-16


@pytest.mark.parametrize("beta", BETAS)
def test_abs_moment_beta_is_one(beta):
    assert abs(BetaGaussian(beta).abs_moment(beta) - 1.0) < 5e-12


@pytest.mark.parametrize("beta,tau", [(0.5, 1.0), (2.0, 1.0), (2.0, 3.0), (4.0, 0.5)])
def test_abs_moment_against_quadrature(beta, tau):
    d = BetaGaussian(beta)
    ref = quad_oracle(lambda y: abs(y) ** tau * d.density(y))
    np.testing.assert_allclose(d.abs_moment(tau), ref, rtol=1e-10)


def test_exp_moment_closed_form():
    # beta = tau = 1/2, alpha = 1/2, nu = 1: 2 c int y e^{-3/2 sqrt y} dy = 24 / 5.0625 * ...
    d = BetaGaussian(0.5)
    ref = 2 * d.c_beta * 2 * math.gamma(4) / 1.5**4
    np.testing.assert_allclose(d.exp_moment(0.5, 0.5, 1), ref, rtol=1e-11)


@pytest.mark.parametrize("beta,alpha,tau,nu", [(2.0, 0.3, 1.0, 0), (1.0, 0.2, 0.5, 2), (0.5, 1.0, 0.25, 1)])
def test_exp_moment_against_oracle(beta, alpha, tau, nu):
    d = BetaGaussian(beta)
    c = d.c_beta
    ref = quad_oracle(lambda y: c * abs(y) ** nu * math.exp(alpha * abs(y) ** tau - abs(y) ** beta / beta))
    np.testing.assert_allclose(d.exp_moment(alpha, tau, nu), ref, rtol=1e-9)


def test_exp_moment_divergence():
    d = BetaGaussian(1.0)
    with pytest.raises(DivergenceError):
        d.exp_moment(0.1, 1.5, 0)
    with pytest.raises(DivergenceError):
        d.exp_moment(1.0, 1.0, 0)


def test_quadrature_spec_validation():
    with pytest.raises(ValueError):
        QuadratureSpec(abs_tol=0)
    with pytest.raises(ValueError):
        QuadratureSpec(max_subdivisions=0)
    with pytest.raises(ValueError):
        BetaGaussian(0.0)
