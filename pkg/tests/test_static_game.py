import numpy as np
import pytest

from pvduopoly.errors import ParameterError
from pvduopoly.static_game import (
    REGION_LABELS,
    StaticRegion,
    a_inverse,
    a_of_x,
    best_response,
    nash_certificate,
    pareto_install,
    static_boundary_F,
    static_equilibrium,
    static_payoff,
    static_region,
    static_value,
)


def brute_force_equilibrium(params, x, y1, y2, n_grid=200, n_iter=60):
    """Iterated best response where each response is a grid argmax of the payoff.

    Independent of the closed forms under test: evaluates the exact quadratic
    payoff on an installation grid and alternates players to a fixed point.
    """
    i1 = i2 = 0.0
    for _ in range(n_iter):
        hi1 = max(params.theta - (y2 + i2) - y1, 0.0)
        grid = np.linspace(0.0, hi1, n_grid)
        vals = static_payoff(params, x, y1, y2, grid, i2, 1)
        i1_new = grid[int(np.argmax(vals))]
        hi2 = max(params.theta - (y1 + i1_new) - y2, 0.0)
        grid = np.linspace(0.0, hi2, n_grid)
        vals = static_payoff(params, x, y1, y2, i1_new, grid, 2)
        i2_new = grid[int(np.argmax(vals))]
        if abs(i1_new - i1) < 1e-12 and abs(i2_new - i2) < 1e-12:
            i1, i2 = i1_new, i2_new
            break
        i1, i2 = i1_new, i2_new
    return i1, i2


def test_a_of_x_examples(pstar):
    assert a_of_x(pstar, 1.0) == pytest.approx(0.0)
    assert a_of_x(pstar, 1.75) == pytest.approx(0.75)
    x0 = pstar.c * (pstar.rho + pstar.k) - pstar.mu * pstar.k / pstar.rho
    assert a_of_x(pstar, x0) == pytest.approx(0.0)
    assert a_inverse(pstar, a_of_x(pstar, 1.37)) == pytest.approx(1.37)


def test_payoff_examples(pstar):
    assert static_payoff(pstar, 1.0, 0.5, 0.5, 0.0, 0.0, 1) == pytest.approx(0.375)
    assert static_payoff(pstar, 0.3, 0.0, 0.4, 0.0, 0.0, 1) == 0.0
    got = static_payoff(pstar, 1.0, 0.0, 0.0, 0.2, 0.2, 1)
    assert got == pytest.approx(0.2 * (1 + 1 - 0.2) / 2 - 0.2)  # -0.02


def test_payoff_rejects_inadmissible(pstar):
    with pytest.raises(ParameterError):
        static_payoff(pstar, 1.0, 0.5, 0.5, 0.2, 0.0, 1)
    with pytest.raises(ParameterError):
        static_payoff(pstar, 1.0, 0.0, 0.0, -0.1, 0.0, 1)


def test_best_response_examples(pstar):
    x = a_inverse(pstar, 0.3)
    assert best_response(pstar, x, 0.25, 0.0, 0.0, 2) == pytest.approx(0.175)
    # A(x) <= 0 never installs
    assert best_response(pstar, 0.0, 0.1, 0.1, 0.0, 1) == 0.0


def test_best_response_is_grid_argmax(pstar):
    rng = np.random.default_rng(7)
    for _ in range(40):
        y1, y2 = rng.uniform(0, 0.5, 2)
        x = rng.uniform(-0.5, 3.0)
        opp = rng.uniform(0, max(pstar.theta - y1 - y2, 0.0) * 0.5)
        br = best_response(pstar, x, y1, y2, opp, 1)
        hi = max(pstar.theta - (y2 + opp) - y1, 0.0)
        grid = np.linspace(0.0, hi, 10001)
        vals = static_payoff(pstar, x, y1, y2, grid, opp, 1)
        assert br == pytest.approx(grid[int(np.argmax(vals))], abs=2 * hi / 10000 + 1e-12)


def test_equilibrium_examples(pstar):
    x03 = a_inverse(pstar, 0.3)
    assert static_equilibrium(pstar, x03, 0.0, 0.0) == pytest.approx((0.2, 0.2))
    x08 = a_inverse(pstar, 0.8)
    assert static_equilibrium(pstar, x08, 0.0, 0.0) == pytest.approx((0.5, 0.5))
    assert static_equilibrium(pstar, x03, 0.25, 0.0) == pytest.approx((0.0, 0.175))


def test_equilibrium_matches_brute_force(pstar):
    rng = np.random.default_rng(5)
    for _ in range(40):
        y1 = rng.uniform(0, 0.7)
        y2 = rng.uniform(0, pstar.theta - y1)
        a = rng.uniform(-0.2, 0.74)  # below the saturation threshold: unique
        x = a_inverse(pstar, a)
        got = static_equilibrium(pstar, x, y1, y2)
        want = brute_force_equilibrium(pstar, x, y1, y2)
        cap = max(pstar.theta - y1 - y2, 1e-6)
        assert got == pytest.approx(want, abs=cap / 199 + 1e-9)


def test_equilibrium_fixed_point_of_best_response(pstar):
    rng = np.random.default_rng(11)
    for _ in range(60):
        y1 = rng.uniform(0, 0.8)
        y2 = rng.uniform(0, pstar.theta - y1)
        x = rng.uniform(-0.5, 2.4)  # A < 0.7: off the saturation set
        i1, i2 = static_equilibrium(pstar, x, y1, y2)
        assert best_response(pstar, x, y1, y2, i2, 1) == pytest.approx(i1, abs=1e-9)
        assert best_response(pstar, x, y1, y2, i1, 2) == pytest.approx(i2, abs=1e-9)


def test_equilibrium_symmetry_and_monotonicity(pstar):
    xs = np.linspace(-0.5, 3.5, 30)
    ys = np.linspace(0.0, 0.45, 8)
    for y1 in ys:
        for y2 in ys:
            i1, i2 = static_equilibrium(pstar, xs, y1, y2)
            j2, j1 = static_equilibrium(pstar, xs, y2, y1)
            np.testing.assert_allclose(i1, j1, atol=1e-12)
            np.testing.assert_allclose(i2, j2, atol=1e-12)
            # monotone non-decreasing in x off the saturation set
            sat = a_of_x(pstar, xs) > 0.75 * pstar.theta
            d = np.diff(i1[~sat])
            assert np.all(d >= -1e-12)
    # non-increasing in own initial capacity
    x = a_inverse(pstar, 0.45)
    own = np.linspace(0.0, 0.5, 21)
    i1, _ = static_equilibrium(pstar, x, own, 0.1)
    assert np.all(np.diff(i1) <= 1e-12)


def test_nash_certificate(pstar):
    x = a_inverse(pstar, 0.3)
    i1, i2 = static_equilibrium(pstar, x, 0.0, 0.0)
    assert nash_certificate(pstar, x, 0.0, 0.0, i1, i2)
    assert not nash_certificate(pstar, x, 0.0, 0.0, 0.0, 0.0)
    # case i: only (0,0) certifies when A <= 0
    x_neg = a_inverse(pstar, -0.1)
    assert nash_certificate(pstar, x_neg, 0.0, 0.0, 0.0, 0.0)
    # case iv: the canonical selection and other saturating selections certify
    x_sat = a_inverse(pstar, 0.9)
    i1, i2 = static_equilibrium(pstar, x_sat, 0.1, 0.1)
    assert i1 + i2 + 0.2 == pytest.approx(pstar.theta)
    assert nash_certificate(pstar, x_sat, 0.1, 0.1, i1, i2)
    assert nash_certificate(pstar, x_sat, 0.1, 0.1, 0.5, 0.3)  # saturates too


def test_static_boundary_examples(pstar):
    assert static_boundary_F(pstar, 1, 0.2, 0.4) == pytest.approx(1.4)
    assert static_boundary_F(pstar, 1, 0.0, 0.0) == pytest.approx(1.0)
    s = np.linspace(0.0, 0.5, 40)
    f = static_boundary_F(pstar, 1, s, s)
    assert np.all(np.diff(f) > 0)
    with pytest.raises(ParameterError):
        static_boundary_F(pstar, 1, 0.4, 0.2)


def test_region_examples(pstar):
    assert static_region(pstar, 0.5, 0.1, 0.1) == StaticRegion("WW", False)
    assert static_region(pstar, 2.0, 0.1, 0.1) == StaticRegion("II", True)
    # player 1 saturation-waits at y1 > theta/2 regardless of price
    reg = static_region(pstar, 2.0, 0.6, 0.2)
    assert reg.label == "WI"


def test_region_matches_equilibrium_installs(pstar):
    rng = np.random.default_rng(3)
    x = rng.uniform(-0.5, 3.0, 4000)
    y1 = rng.uniform(0, 1.0, 4000)
    y2 = rng.uniform(0, 1.0, 4000)
    keep = y1 + y2 < pstar.theta - 1e-6
    x, y1, y2 = x[keep], y1[keep], y2[keep]
    code, _ = static_region(pstar, x, y1, y2)
    i1, i2 = static_equilibrium(pstar, x, y1, y2)
    # skip states within a hair of a region boundary
    f1 = np.where(y1 <= y2, a_inverse(pstar, y1 + 0.5 * y2),
                  a_inverse(pstar, 1.5 * y1))
    f2 = np.where(y2 <= y1, a_inverse(pstar, y2 + 0.5 * y1),
                  a_inverse(pstar, 1.5 * y2))
    interior = (np.abs(x - f1) > 1e-6) & (np.abs(x - f2) > 1e-6)
    inst1 = i1 > 1e-12
    inst2 = i2 > 1e-12
    in_i1 = (code == 1) | (code == 3)
    in_i2 = (code == 2) | (code == 3)
    np.testing.assert_array_equal(inst1[interior], in_i1[interior])
    np.testing.assert_array_equal(inst2[interior], in_i2[interior])


def test_value_rows(pstar):
    # WW row is the no-installation annuity
    assert static_value(pstar, 0.5, 0.1, 0.2, 1) == pytest.approx(
        static_payoff(pstar, 0.5, 0.1, 0.2, 0.0, 0.0, 1))
    # II row from the origin: target (2/3)A each
    x = a_inverse(pstar, 0.3)
    want = static_payoff(pstar, x, 0.0, 0.0, 0.2, 0.2, 1)
    assert static_value(pstar, x, 0.0, 0.0, 1) == pytest.approx(want)


def test_value_equals_equilibrium_payoff_on_grid(pstar):
    n = 22
    xs = np.linspace(-1.0, 3.0, n)
    ys = np.linspace(0.0, pstar.theta, n)
    X, Y1, Y2 = np.meshgrid(xs, ys, ys, indexing="ij")
    keep = (Y1 + Y2) <= pstar.theta
    x, y1, y2 = X[keep], Y1[keep], Y2[keep]
    i1, i2 = static_equilibrium(pstar, x, y1, y2)
    for player in (1, 2):
        v = static_value(pstar, x, y1, y2, player)
        s = static_payoff(pstar, x, y1, y2, i1, i2, player)
        np.testing.assert_allclose(v, s, atol=1e-10)


def test_pareto_examples(pstar):
    assert pareto_install(pstar, a_inverse(pstar, 0.9), 0.0) == pytest.approx(0.9)
    assert pareto_install(pstar, a_inverse(pstar, -0.2), 0.0) == 0.0
    # Nash saturates at A = 0.8 while Pareto does not
    x = a_inverse(pstar, 0.8)
    i1, i2 = static_equilibrium(pstar, x, 0.0, 0.0)
    assert i1 + i2 == pytest.approx(pstar.theta)
    assert pareto_install(pstar, x, 0.0) == pytest.approx(0.8)


def test_region_labels_table():
    assert REGION_LABELS == ("WW", "IW", "WI", "II")
