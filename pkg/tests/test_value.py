import numpy as np
import pytest

from pvduopoly.value import REGION4, RegionLabel4


def test_r_i_examples(pstar, value_pstar):
    v = value_pstar
    assert v.r_i(1.0, 0.5, 0.5, 1) == pytest.approx(0.375)
    assert v.r_i(2.3, 0.0, 0.4, 1) == 0.0
    rng = np.random.default_rng(1)
    x = rng.uniform(-1, 3, 50)
    y1 = rng.uniform(0, 0.6, 50)
    y2 = rng.uniform(0, 1.0 - 0.6, 50)
    np.testing.assert_allclose(v.r_i(x, y1, y2, 1), v.r_i(x, y2, y1, 2), atol=1e-14)


def test_classify_examples(pstar, value_pstar, boundary_pstar):
    f00 = boundary_pstar.f_diag(0.0)
    assert value_pstar.classify(f00 - 1.0, 0.0, 0.0).label == "W1W2"
    assert value_pstar.classify(9.0, 0.0, 0.0).label == "I1I2"
    lab = value_pstar.classify(9.0, 0.6, 0.3)
    assert lab.sub1 == "sat"          # player 1 waits by saturation
    assert lab.label in ("W1W2", "W1I2")
    assert REGION4 == ("W1W2", "I1W2", "W1I2", "I1I2")


def test_value_ww_is_raw_candidate(value_pstar):
    x, y1, y2 = 0.7, 0.15, 0.25
    assert value_pstar.classify(x, y1, y2).label == "W1W2"
    assert value_pstar.value(x, y1, y2, 1) == pytest.approx(
        value_pstar.v_raw(x, y1, y2))


def test_value_on_capacity_face_is_annuity(value_pstar):
    # option coefficient vanishes on the face, so the candidate equals the
    # perpetual revenue there
    x = 0.9
    assert value_pstar.classify(x, 0.3, 0.7).label == "W1W2"
    assert value_pstar.value(x, 0.3, 0.7, 1) == pytest.approx(
        value_pstar.r_i(x, 0.3, 0.7, 1), abs=1e-10)


def test_reflection_identity_exact(value_pstar):
    rng = np.random.default_rng(2)
    x = rng.uniform(-1, 3, 200)
    y1 = rng.uniform(0, 1, 200)
    y2 = rng.uniform(0, 1, 200)
    keep = y1 + y2 <= 1.0
    v2 = value_pstar.value(x[keep], y1[keep], y2[keep], 2)
    v1_of_swap = value_pstar.value(x[keep], y2[keep], y1[keep], 1)
    np.testing.assert_array_equal(v2, v1_of_swap)


def test_pde_residual_interior(value_pstar):
    summary = value_pstar.pde_residual_summary(nx=15, ny=24)
    assert summary["n"] > 100
    assert summary["max"] <= 1e-6


def test_annuity_residual_identically_zero(value_pstar):
    rng = np.random.default_rng(3)
    x = rng.uniform(-2, 3, 100)
    y1 = rng.uniform(0, 0.5, 100)
    y2 = rng.uniform(0, 0.5, 100)
    assert np.max(np.abs(value_pstar.residual_annuity(x, y1, y2))) < 1e-12


def test_smooth_fit_residuals_at_nodes(value_pstar):
    r1, r2 = value_pstar.smooth_fit_residuals_at_nodes()
    assert r1 <= 1e-4
    assert r2 <= 1e-4


def test_smooth_fit_pointwise(value_pstar):
    r1, r2 = value_pstar.residual_smooth_fit(0.1, 0.3)
    assert abs(r1) <= 5e-4   # interpolated off-node evaluation
    assert abs(r2) <= 5e-4


def test_diag_matching_residual(value_pstar):
    assert abs(value_pstar.diag_matching_residual()) <= 1e-4


def test_remark_inconsistency_check(pstar, value_pstar):
    val = value_pstar.remark_inconsistency_check()
    # root/(rho+k) + k(mu - beta theta)/(rho(rho+k)) - c at root 2.4597...
    assert val == pytest.approx(0.47985, abs=2e-4)
    assert val > 0.4
    # affine and increasing in the evaluation point
    lo = value_pstar.remark_inconsistency_check(x_override=2.0)
    hi = value_pstar.remark_inconsistency_check(x_override=2.5)
    assert hi - lo == pytest.approx(0.5 / (pstar.rho + pstar.k))
    # diagnostic mode at the capacity anchor stays computable
    anchored = value_pstar.remark_inconsistency_check(
        x_override=1.5 + pstar.beta * pstar.theta)
    assert np.isfinite(anchored)


def test_dy2_vanishes_where_opponent_installs(value_pstar):
    assert value_pstar.dy2_in_install_region_check() <= 1e-8


def test_interface_continuity(value_pstar):
    j1, j2 = value_pstar.interface_continuity()
    assert j1 <= 1e-3
    assert j2 <= 1e-3


def test_reported_constants_finite(value_pstar):
    assert 0 < value_pstar.growth_constant() < 10
    assert 0 < value_pstar.dx_lipschitz_constant() < 100
    worst, loc = value_pstar.value_minus_annuity_report()
    assert np.isfinite(worst) and loc is not None
    worst_grad, loc2 = value_pstar.dy1_gradient_inequality_report(n=12)
    assert np.isfinite(worst_grad) and loc2 is not None
    assert value_pstar.dxx_jump_across_f1(n=5) >= 0.0
