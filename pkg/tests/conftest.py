import numpy as np
import pytest

from pvduopoly.params import ModelParams
from pvduopoly.psi import PsiEvaluator

# Parameter set used for every worked numeric example in the suite.
PSTAR = ModelParams(k=1.0, mu=1.0, sigma=1.0, beta=0.5, rho=1.0, c=1.0, theta=1.0)


@pytest.fixture(scope="session")
def pstar() -> ModelParams:
    return PSTAR


@pytest.fixture(scope="session")
def psi_pstar(pstar) -> PsiEvaluator:
    return PsiEvaluator(pstar, x_range=(pstar.mu - 10.0, pstar.mu + 10.0))


@pytest.fixture(scope="session")
def boundary_pstar(pstar, psi_pstar):
    from pvduopoly.boundary import solve_boundary
    return solve_boundary(pstar, psi_pstar, n=200)


@pytest.fixture(scope="session")
def mgrid_pstar(pstar, psi_pstar, boundary_pstar):
    from pvduopoly.boundary import solve_m
    return solve_m(pstar, psi_pstar, boundary_pstar, n=200)


@pytest.fixture(scope="session")
def value_pstar(pstar, psi_pstar, boundary_pstar, mgrid_pstar):
    from pvduopoly.value import ValueField
    return ValueField(pstar, psi_pstar, boundary_pstar, mgrid_pstar)


def psi_nu1_exact(params, x):
    """Closed-form psi suite for rho = k (nu = 1), the independent oracle.

    psi(x) = sqrt(2 pi) exp(w^2/2) Phi(w) with w = (x - mu) sqrt(2k)/sigma;
    derivatives follow from d psi/dw = w psi + 1.
    """
    from scipy.special import ndtr

    assert abs(params.rho - params.k) < 1e-15
    s2k = np.sqrt(2.0 * params.k) / params.sigma
    w = (np.asarray(x, dtype=float) - params.mu) * s2k
    p0 = np.sqrt(2.0 * np.pi) * np.exp(0.5 * w * w) * ndtr(w)
    d1 = w * p0 + 1.0
    d2 = p0 + w * d1
    d3 = 2.0 * d1 + w * d2
    return np.stack([p0, d1 * s2k, d2 * s2k ** 2, d3 * s2k ** 3])
