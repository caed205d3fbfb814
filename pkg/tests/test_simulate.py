import math

import numpy as np
import pytest

from pvduopoly.errors import ParameterError
from pvduopoly.params import SimplexPoint
from pvduopoly.simulate import Deviation, SimConfig, Simulator


@pytest.fixture(scope="module")
def sim(pstar, boundary_pstar):
    cfg = SimConfig(dt=2e-3, n_paths=8192, seed=12, horizon=6.0, chunk_paths=8192)
    return Simulator(pstar, boundary_pstar, cfg)


def closed_form_annuity(pstar, x, y1, y2, player, horizon):
    """Exact discounted revenue of frozen capacities over [0, T]."""
    p = pstar
    ybar = y1 + y2
    own = (y1, y2)[player - 1]
    mean_level = p.mu - p.beta * ybar
    # integral of e^{-rho t} E[X_t] dt over [0, T]
    a = mean_level / p.rho * (1 - math.exp(-p.rho * horizon))
    b = (x - mean_level) / (p.rho + p.k) * (1 - math.exp(-(p.rho + p.k) * horizon))
    return own * (a + b)


def test_config_validation(pstar):
    with pytest.raises(ParameterError):
        SimConfig(dt=0.5, n_paths=10).validate(pstar)   # dt >= 1/(2k)
    with pytest.raises(ParameterError):
        SimConfig(dt=1e-3, n_paths=0).validate(pstar)
    with pytest.raises(ParameterError):
        SimConfig(dt=1e-3, n_paths=1, scheme="milstein").validate(pstar)
    cfg = SimConfig(dt=1e-3, n_paths=1).validate(pstar)
    T = cfg.resolved_horizon(pstar)
    assert cfg.tail_bound(pstar, T, abs(pstar.mu) + 5 * pstar.ou_scale) <= 1e-4 + 1e-12
    assert T == pytest.approx(10.72, abs=0.01)


def test_deviation_parse():
    assert Deviation.parse("shift:0.05") == Deviation("shift", 0.05)
    assert Deviation.parse("lump:0.1") == Deviation("lump", 0.1)
    assert Deviation.parse("never") == Deviation("never")
    with pytest.raises(ParameterError):
        Deviation.parse("jump:1")
    with pytest.raises(ParameterError):
        Deviation.parse("shift")


def test_zero_control_matches_annuity(sim, pstar):
    for x0, y0 in [(0.6, SimplexPoint(0.2, 0.3)), (1.4, SimplexPoint(0.4, 0.1))]:
        res = sim.simulate(x0, y0, frozen_both=True)
        for player in (1, 2):
            est = res.estimate(pstar, player)
            want = closed_form_annuity(pstar, x0, y0.y1, y0.y2, player, res.horizon)
            assert abs(est.mean - want) <= 3 * est.std_error + 2e-3 * abs(want)
    # zero capacity earns and costs exactly nothing
    res = sim.simulate(0.9, SimplexPoint(0.0, 0.0), frozen_both=True)
    assert np.all(res.payoff1 == 0.0)


def test_terminal_price_matches_ou_mean(sim, pstar):
    x0, y0 = 0.4, SimplexPoint(0.3, 0.2)
    res = sim.simulate(x0, y0, frozen_both=True)
    mean_level = pstar.mu - pstar.beta * y0.total
    want = mean_level + (x0 - mean_level) * math.exp(-pstar.k * res.horizon)
    se = res.x_final.std(ddof=1) / math.sqrt(res.x_final.size)
    assert abs(res.x_final.mean() - want) <= 3 * se + 5e-3


def test_lump_only_matches_static_profit(sim, pstar):
    from pvduopoly.static_game import a_inverse, static_equilibrium, static_payoff

    x0 = float(a_inverse(pstar, 0.45))
    y0 = SimplexPoint(0.05, 0.1)
    i1, i2 = static_equilibrium(pstar, x0, y0.y1, y0.y2)
    res = sim.simulate(x0, y0, frozen_both=True, lumps=(i1, i2))
    for player in (1, 2):
        est = res.estimate(pstar, player)
        want = static_payoff(pstar, x0, y0.y1, y0.y2, i1, i2, player)
        # finite-horizon truncation plus EM bias, all well inside 3 SE here
        assert abs(est.mean - want) <= 3 * est.std_error + 4e-3


def test_kernel_agrees_with_explicit_paths(sim, pstar):
    x0, y0 = 1.35, SimplexPoint(0.05, 0.15)
    paths = sim.simulate_paths(x0, y0, n_paths=3)
    cfg_small = SimConfig(dt=sim.config.dt, n_paths=3, seed=sim.config.seed,
                          horizon=sim.config.horizon, chunk_paths=4096)
    small = Simulator(pstar, sim.boundary, cfg_small)
    small._tables = sim.tables
    res = small.simulate(x0, y0)
    for i, path in enumerate(paths):
        assert small.payoff(path, 1) == pytest.approx(res.payoff1[i], abs=2e-6)
        assert small.payoff(path, 2) == pytest.approx(res.payoff2[i], abs=2e-6)


def test_path_invariants(sim, pstar, boundary_pstar):
    x0, y0 = 1.4, SimplexPoint(0.1, 0.2)
    for path in sim.simulate_paths(x0, y0, n_paths=4):
        assert np.all(np.diff(path.y1) >= 0)
        assert np.all(np.diff(path.y2) >= 0)
        assert np.max(path.y1 + path.y2) <= pstar.theta + 1e-9
        # after t=0 the state never exceeds the joint waiting bound by more
        # than the scheme tolerance
        b1 = boundary_pstar.threshold_price(path.y1[1:], path.y2[1:])
        b2 = boundary_pstar.threshold_price(path.y2[1:], path.y1[1:])
        bound = np.minimum(b1, b2)
        tol = 8 * pstar.sigma * math.sqrt(sim.config.dt) + 5e-3
        assert np.max(np.where(np.isfinite(bound), path.x[1:] - bound, -np.inf)) <= tol


def test_deep_waiting_start_installs_nothing(pstar, boundary_pstar):
    # far below the boundary over a short window: the control never activates
    cfg = SimConfig(dt=1e-3, n_paths=2048, seed=5, horizon=0.5)
    short = Simulator(pstar, boundary_pstar, cfg)
    res = short.simulate(-2.0, SimplexPoint(0.2, 0.25))
    assert res.y0_post == (0.2, 0.25)
    assert np.all(res.max_increment <= 1e-12)
    assert np.all(res.y1_final == 0.2)


def test_initial_lump_regions(sim, pstar, boundary_pstar):
    # joint installation region: both jump to the diagonal target
    x0 = 1.45
    t = float(boundary_pstar.f_diag_inverse(x0))
    res = sim.simulate(x0, SimplexPoint(0.0, 0.0))
    assert res.y0_post == pytest.approx((t, t), abs=1e-9)
    # never-deviation suppresses player 1's lump only
    r2 = sim.simulate(x0, SimplexPoint(0.0, 0.0), deviation=Deviation("never"))
    assert r2.y0_post[0] == 0.0
    assert r2.y0_post[1] == pytest.approx(t, abs=1e-9)


def test_player_symmetry(sim, pstar):
    x0 = 1.3
    ra = sim.simulate(x0, SimplexPoint(0.05, 0.25))
    rb = sim.simulate(x0, SimplexPoint(0.25, 0.05))
    np.testing.assert_allclose(ra.payoff1, rb.payoff2, atol=1e-10)
    np.testing.assert_allclose(ra.payoff2, rb.payoff1, atol=1e-10)


def test_monotone_coupling_in_x0(pstar, boundary_pstar):
    # With price impact the pathwise coupling is broken by preemption: a
    # higher start can make the opponent install first, shrinking own
    # targets on a minority of paths. Mean capacities and the pathwise
    # joint capacity remain monotone.
    cfg = SimConfig(dt=2e-3, n_paths=4096, seed=9, horizon=1.5)
    s = Simulator(pstar, boundary_pstar, cfg)
    lo = s.simulate(0.9, SimplexPoint(0.1, 0.1))
    hi = s.simulate(1.1, SimplexPoint(0.1, 0.1))
    assert hi.y1_final.mean() > lo.y1_final.mean()
    assert hi.y2_final.mean() > lo.y2_final.mean()
    total = (hi.y1_final + hi.y2_final) - (lo.y1_final + lo.y2_final)
    assert total.mean() > 0
    frac_neg = np.mean(hi.y1_final - lo.y1_final < -1e-6)
    assert frac_neg < 0.05  # feedback flips only a small minority of paths


def test_refinement_with_coupled_noise(pstar, boundary_pstar):
    x0, y0 = 1.35, SimplexPoint(0.1, 0.15)
    n_paths, T = 4096, 4.0
    fine_cfg = SimConfig(dt=1e-3, n_paths=n_paths, seed=3, horizon=T)
    coarse_cfg = SimConfig(dt=2e-3, n_paths=n_paths, seed=3, horizon=T)
    fine = Simulator(pstar, boundary_pstar, fine_cfg)
    coarse = Simulator(pstar, boundary_pstar, coarse_cfg)
    coarse._tables = fine.tables
    rng = np.random.Generator(np.random.Philox(key=np.array([3, 0], dtype=np.uint64)))
    z_fine = rng.standard_normal((n_paths, 4000), dtype=np.float32)
    z_coarse = ((z_fine[:, ::2] + z_fine[:, 1::2]) / np.float32(np.sqrt(2.0)))
    fine._noise_hook = lambda s, c, r, n: z_fine[:r, :n]
    coarse._noise_hook = lambda s, c, r, n: z_coarse[:r, :n]
    rf = fine.simulate(x0, y0)
    rc = coarse.simulate(x0, y0)
    diff = rf.payoff1 - rc.payoff1
    se = diff.std(ddof=1) / math.sqrt(diff.size)
    assert abs(diff.mean()) <= max(3 * se, 2e-3)


def test_nash_report_structure(sim, pstar, value_pstar):
    rep = sim.nash_test(1.35, SimplexPoint(0.1, 0.2), value_pstar,
                        [Deviation("lump", 0.1), Deviation("never")])
    assert {"equilibrium", "deviations", "max_overshoot"} <= set(rep)
    assert len(rep["deviations"]) == 2
    lump_row = rep["deviations"][0]
    # extra installation loses against the candidate strategy
    assert lump_row["diff_mean"] <= 2 * lump_row["diff_se"]
    eq = rep["equilibrium"]
    assert eq["abs_error1"] <= eq["value_tolerance"]


def test_face_root_anchor_restores_deviation_losses(pstar, psi_pstar, value_pstar):
    # Diagnostic mode: starting the diagonal ODE from the vanishing-
    # coefficient root at C (instead of the exact cap formula) makes the
    # never-install free-riding deviation lose clearly; under the contract
    # anchor it wins. This isolates the anchor as the cause of the Nash
    # failure, mirroring the construction's documented inconsistency.
    from pvduopoly.boundary import solve_boundary

    alt = solve_boundary(pstar, psi_pstar, n=120, diag_anchor="face-root")
    assert alt.f_diag(0.5) > 2.0  # strictly above the cap-formula anchor
    cfg = SimConfig(dt=4e-3, n_paths=8192, seed=4, horizon=6.0)
    sim_alt = Simulator(pstar, alt, cfg)
    x0, y0 = 1.35, SimplexPoint(0.1, 0.2)
    eq = sim_alt.simulate(x0, y0)
    dev = sim_alt.simulate(x0, y0, deviation=Deviation("never"))
    d = dev.payoff1 - eq.payoff1
    assert d.mean() < 0
    assert d.mean() < -3 * d.std(ddof=1) / math.sqrt(d.size)
