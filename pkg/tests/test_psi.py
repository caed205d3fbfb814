import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pvduopoly.errors import QuadratureError
from pvduopoly.params import ModelParams
from pvduopoly.psi import PsiEvaluator

from conftest import psi_nu1_exact


def test_gaussian_integral_values(psi_pstar):
    # At x = mu with k = rho = sigma = 1 the integral collapses to Gaussian
    # moments: psi(mu) = sqrt(pi/2), psi'(mu) = sqrt(2).
    assert psi_pstar.psi(1.0, 0) == pytest.approx(math.sqrt(math.pi / 2.0), abs=1e-10)
    assert psi_pstar.psi(1.0, 1) == pytest.approx(math.sqrt(2.0), abs=1e-10)


def test_matches_closed_form_nu1(pstar, psi_pstar):
    xs = np.linspace(pstar.mu - 6.0, pstar.mu + 6.0, 121)
    got = psi_pstar.psi_all(xs)
    want = psi_nu1_exact(pstar, xs)
    assert np.max(np.abs(got / want - 1.0)) < 1e-9


def test_matches_closed_form_nu2():
    # rho = 2k gives psi proportional to 1 + z * psi_nu1-part, another
    # independent closed form: I_2(z) = z I_1(z) + 1.
    from scipy.special import ndtr

    params = ModelParams(k=1.0, mu=0.5, sigma=0.8, beta=0.5, rho=2.0, c=1.0, theta=1.0)
    ev = PsiEvaluator(params)
    xs = np.linspace(params.mu - 4.0, params.mu + 4.0, 41)
    z = (xs - params.mu) * np.sqrt(2.0 * params.k) / params.sigma
    i1 = np.sqrt(2.0 * np.pi) * np.exp(0.5 * z * z) * ndtr(z)
    want = (z * i1 + 1.0) / math.gamma(2.0)
    assert np.max(np.abs(ev.psi(xs) / want - 1.0)) < 1e-9


def test_ode_residual_spec_points(psi_pstar):
    for x in (-2.0, 0.0, 1.0, 3.0):
        res = psi_pstar.ode_residual(x)
        assert abs(res) <= 1e-6 * max(1.0, psi_pstar.psi(x))


def test_positivity_and_wronskians(pstar, psi_pstar):
    xs = np.linspace(pstar.mu - 5 * pstar.sigma, pstar.mu + 5 * pstar.sigma, 200)
    p = psi_pstar.psi_all(xs)
    assert np.all(p[0] > 0) and np.all(p[1] > 0) and np.all(p[2] > 0)
    assert np.all(psi_pstar.q0(xs) > 0)
    assert np.all(psi_pstar.q1(xs) > 0)


def test_q0_matches_finite_differences(psi_pstar):
    xs = np.linspace(-1.0, 3.0, 17)
    h = 1e-4
    p0 = psi_pstar.psi(xs)
    d1 = (psi_pstar.psi(xs + h) - psi_pstar.psi(xs - h)) / (2 * h)
    d2 = (psi_pstar.psi(xs + h) - 2 * p0 + psi_pstar.psi(xs - h)) / h ** 2
    q0_fd = p0 * d2 - d1 ** 2
    assert np.max(np.abs(q0_fd / psi_pstar.q0(xs) - 1.0)) < 1e-5


def test_derivative_consistency_fd(psi_pstar):
    xs = np.linspace(-1.0, 3.0, 9)
    h = 1e-4
    for order in (0, 1, 2):
        fd = (psi_pstar.psi(xs + h, order) - psi_pstar.psi(xs - h, order)) / (2 * h)
        assert np.max(np.abs(fd / psi_pstar.psi(xs, order + 1) - 1.0)) < 1e-5


def test_error_estimate_and_check(psi_pstar):
    assert psi_pstar.rel_err_estimate <= 1e-10
    assert psi_pstar.estimate_error(np.linspace(-3, 4, 11)) < 1e-9
    psi_pstar.psi_all(np.linspace(-3, 4, 11), check=True)


def test_bad_order_rejected(psi_pstar):
    with pytest.raises(ValueError):
        psi_pstar.psi(1.0, 4)


def test_nonconvergence_reported(pstar):
    with pytest.raises(QuadratureError):
        PsiEvaluator(pstar, rel_tol=1e-10, n_start=4, n_max=8)


@settings(max_examples=15, deadline=None)
@given(
    k=st.floats(0.25, 4.0),
    rho=st.floats(0.25, 4.0),
    sigma=st.floats(0.3, 3.0),
    mu=st.floats(-2.0, 2.0),
)
def test_ode_residual_random_params(k, rho, sigma, mu):
    params = ModelParams(k=k, mu=mu, sigma=sigma, beta=0.5, rho=rho, c=1.0, theta=1.0)
    ev = PsiEvaluator(params)
    xs = np.linspace(mu - 4 * params.ou_scale, mu + 4 * params.ou_scale, 25)
    res = np.abs(ev.ode_residual(xs))
    scale = np.maximum(1.0, ev.psi(xs))
    assert np.max(res / scale) < 1e-6
    assert np.all(ev.q0(xs) > 0)
    assert np.all(ev.q1(xs) > 0)
