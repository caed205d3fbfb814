"""Command-line entry point: solve, evaluate, simulate, emit CSV.

Exit codes: 0 success, 2 usage/parameter errors, 1 numerical failures.
All numeric output is deterministic given the flags and the seed.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .errors import NumericalError, ParameterError
from .params import ModelParams, SimplexPoint
from .psi import PsiEvaluator
from .static_game import (
    REGION_LABELS, a_of_x, nash_certificate, pareto_install, static_equilibrium,
    static_region, static_value,
)

_PARAM_FLAGS = ("k", "mu", "sigma", "beta", "rho", "c", "theta")


def _load_params(args) -> ModelParams:
    if getattr(args, "config", None):
        return ModelParams.from_json(args.config)
    vals = {name: getattr(args, name, None) for name in _PARAM_FLAGS}
    if all(v is not None for v in vals.values()):
        return ModelParams(**{kk: float(v) for kk, v in vals.items()}).validate()
    raise ParameterError("--config is required (or pass all seven parameter flags)")


def _psi_for(params: ModelParams) -> PsiEvaluator:
    from .boundary import f_tilde_at_cap

    s = params.ou_scale
    hi = max(params.mu + 12.0 * s,
             f_tilde_at_cap(params) + params.beta * params.theta + 8.0 * s)
    return PsiEvaluator(params, x_range=(params.mu - 12.0 * s, hi))


def _solved(params: ModelParams, n: int, anchor: str = "cap-formula"):
    from .boundary import solve_boundary, solve_m

    psi = _psi_for(params)
    bnd = solve_boundary(params, psi, n=n, diag_anchor=anchor)
    mgrid = solve_m(params, psi, bnd, n=n)
    return psi, bnd, mgrid


def _write_csv(path: str, params: ModelParams, header: list[str], rows, seed=None):
    with open(path, "w") as fh:
        tag = f"# pvduopoly {__version__}; params: {params.describe()}"
        if seed is not None:
            tag += f"; seed={seed}"
        fh.write(tag + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    return f"{float(v):.12g}"


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_psi(args) -> int:
    params = _load_params(args)
    ev = _psi_for(params)
    val = float(ev.psi(args.x, args.order))
    err = ev.estimate_error([args.x])
    if args.json:
        print(json.dumps({"x": args.x, "order": args.order, "value": val,
                          "rel_error_estimate": err}))
    else:
        print(f"psi^({args.order})({args.x:g}) = {val:.12g}   "
              f"(estimated rel. quadrature error {err:.2e})")
    return 0


def cmd_static_game(args) -> int:
    params = _load_params(args)
    if args.grid is not None:
        n = args.grid
        xs = np.linspace(params.mu - 2.0, params.mu + 2.0 * params.theta + 2.0, n)
        g = np.linspace(0.0, params.theta, n)
        rows = []
        for x in xs:
            y1g, y2g = np.meshgrid(g, g, indexing="ij")
            keep = y1g + y2g <= params.theta
            y1, y2 = y1g[keep], y2g[keep]
            code, _ = static_region(params, np.full_like(y1, x), y1, y2)
            i1, i2 = static_equilibrium(params, x, y1, y2)
            v1 = static_value(params, x, y1, y2, 1)
            v2 = static_value(params, x, y1, y2, 2)
            for row in zip(y1, y2, code, i1, i2, v1, v2):
                rows.append((x, row[0], row[1], REGION_LABELS[int(row[2])],
                             *row[3:]))
        if not args.out:
            raise ParameterError("--grid requires --out for the CSV")
        _write_csv(args.out, params,
                   ["x", "y1", "y2", "region", "i1", "i2", "v1", "v2"], rows)
        print(f"wrote {len(rows)} rows to {args.out}")
        return 0

    if args.x is None or args.y1 is None or args.y2 is None:
        raise ParameterError("static-game needs --x --y1 --y2 (or --grid n)")
    y = SimplexPoint(args.y1, args.y2).validate(params.theta)
    reg = static_region(params, args.x, y.y1, y.y2)
    i1, i2 = static_equilibrium(params, args.x, y.y1, y.y2)
    v1 = static_value(params, args.x, y.y1, y.y2, 1)
    v2 = static_value(params, args.x, y.y1, y.y2, 2)
    cert = bool(nash_certificate(params, args.x, y.y1, y.y2, i1, i2))
    out = {
        "x": args.x, "y1": y.y1, "y2": y.y2,
        "A": float(a_of_x(params, args.x)),
        "region": reg.label, "saturating": reg.saturating,
        "i1": i1, "i2": i2, "v1": v1, "v2": v2,
        "nash_certificate": cert,
        "pareto_aggregate_install": pareto_install(params, args.x, y.total),
    }
    if args.json:
        print(json.dumps(out))
    else:
        print(f"region {reg.label}{' (saturating)' if reg.saturating else ''}; "
              f"A(x) = {out['A']:.6g}")
        print(f"equilibrium installs: i1 = {i1:.10g}, i2 = {i2:.10g} "
              f"(certificate: {'pass' if cert else 'FAIL'})")
        print(f"values: v1 = {v1:.10g}, v2 = {v2:.10g}")
        print(f"Pareto aggregate install: {out['pareto_aggregate_install']:.10g}")
    return 0


def cmd_boundary(args) -> int:
    params = _load_params(args)
    if args.action == "solve":
        from .boundary import solve_boundary

        psi = _psi_for(params)
        bnd = solve_boundary(params, psi, n=args.n, diag_anchor=args.anchor)
        rows = []
        for s, ft in zip(bnd.diag.s, bnd.diag.f_tilde):
            rows.append(("diag", s, ft - 2 * params.beta * s, ft))
        for u, ft in zip(bnd.side_u, bnd.side_ft):
            rows.append(("side", u, ft - params.beta * params.theta, ft))
        _write_csv(args.out, params, ["kind", "s", "F", "Ftilde"], rows)
        rep = bnd.admissibility_report(n=121)
        print(f"wrote {len(rows)} rows to {args.out}; c_gap = {bnd.c_gap:.6g}; "
              f"admissibility violations: {rep.n_violations}")
        return 0
    # action == "m"
    psi, bnd, mgrid = _solved(params, args.n, args.anchor)
    n, h = mgrid.n, mgrid.h
    rows = []
    for i in range(n + 1):
        for j in range(n + 1 - i):
            if not np.isfinite(mgrid.m[i, j]):
                continue
            g1 = mgrid.dm1_upper[i, j] if i <= j else mgrid.dm1_lower[i, j]
            g2 = mgrid.dm2_upper[i, j] if i <= j else mgrid.dm2_lower[i, j]
            rows.append((i * h, j * h, mgrid.m[i, j], g1, g2))
    _write_csv(args.out, params, ["y1", "y2", "m1", "dm1", "dm2"], rows)
    d = mgrid.diagnostics
    print(f"wrote {len(rows)} rows to {args.out}; |m| on capacity face <= "
          f"{d['ab_max_abs']:.2e}; min m = {d['m_min']:.4g}")
    return 0


def cmd_value(args) -> int:
    from .value import REGION4, ValueField

    params = _load_params(args)
    psi, bnd, mgrid = _solved(params, args.n, args.anchor)
    vf = ValueField(params, psi, bnd, mgrid)
    if args.action == "grid":
        xs, y1, y2 = vf.probe_box(nx=args.nx, ny=args.ny)
        rows = []
        for x in xs:
            xv = np.full_like(y1, x)
            code = vf.classify(xv, y1, y2)
            v1 = vf.value(xv, y1, y2, 1)
            v2 = vf.value(xv, y1, y2, 2)
            u = xv + params.beta * (y1 + y2)
            ps = psi.psi_all(u)
            m = mgrid.value(y1, y2)
            g1, g2 = mgrid.grad(y1, y2)
            dr1 = (xv * params.rho + params.mu * params.k
                   - params.beta * params.k * (y1 + y2)
                   - params.beta * params.k * y1) / (params.rho * (params.rho + params.k))
            dv1 = g1 * ps[0] + params.beta * m * ps[1] + dr1
            dv2 = g2 * ps[0] + params.beta * m * ps[1] \
                - params.beta * params.k * y1 / (params.rho * (params.rho + params.k))
            res = vf.residual_pde(xv, y1, y2)
            for t in zip(xv, y1, y2, code, v1, v2, dv1, dv2, res):
                rows.append((t[0], t[1], t[2], REGION4[int(t[3])], *t[4:]))
        _write_csv(args.out, params,
                   ["x", "y1", "y2", "region", "V1", "V2",
                    "dV1dy1", "dV1dy2", "pde_residual"], rows)
        print(f"wrote {len(rows)} rows to {args.out}")
        return 0

    # action == "check": residual summary
    fit1, fit2 = vf.smooth_fit_residuals_at_nodes()
    pde = vf.pde_residual_summary()
    j1, j2 = vf.interface_continuity()
    d = mgrid.diagnostics
    rep = bnd.admissibility_report(n=121)
    summary = {
        "pde_residual_max": pde["max"],
        "pde_residual_mean": pde["mean"],
        "smooth_fit_own_max": fit1,
        "smooth_fit_cross_max": fit2,
        "diag_matching_residual_at_C": vf.diag_matching_residual(),
        "capacity_face_coefficient_max": d["ab_max_abs"],
        "coefficient_min": d["m_min"],
        "diag_gradient_jump": d["diag_jump_max"],
        "interface_jump_F1": j1,
        "interface_jump_F2": j2,
        "boundary_c_gap": bnd.c_gap,
        "admissibility_violations": rep.n_violations,
        "growth_constant_K": vf.growth_constant(),
        "dx_lipschitz_L": vf.dx_lipschitz_constant(),
        "inverse_lipschitz_kappa": bnd.lipschitz_kappa(),
        "gradient_inequality_worst": vf.dy1_gradient_inequality_report(n=15)[0],
        "face_root_check": vf.remark_inconsistency_check(),
    }
    if args.json:
        print(json.dumps(summary))
    else:
        w = max(len(k) for k in summary)
        for k, v in summary.items():
            print(f"{k:<{w}} : {v:.6g}")
    return 0


def cmd_simulate(args) -> int:
    from .boundary import solve_boundary
    from .simulate import Deviation, SimConfig, Simulator

    params = _load_params(args)
    psi = _psi_for(params)
    bnd = solve_boundary(params, psi, n=args.n, diag_anchor=args.anchor)
    cfg = SimConfig(dt=args.dt, n_paths=args.paths, seed=args.seed,
                    horizon=args.horizon, antithetic=args.antithetic)
    sim = Simulator(params, bnd, cfg)
    y0 = SimplexPoint(args.y1, args.y2).validate(params.theta)
    dev = Deviation.parse(args.deviation) if args.deviation else None
    res = sim.simulate(args.x0, y0, deviation=dev)
    e1 = res.estimate(params, 1)
    e2 = res.estimate(params, 2)
    print(f"n = {e1.n}, horizon = {res.horizon:.6g}, dt = {res.dt:.3g}, "
          f"post-lump state = ({res.y0_post[0]:.6g}, {res.y0_post[1]:.6g})")
    print(f"payoff1 = {e1.mean:.6g} +- {e1.std_error:.2g}   "
          f"payoff2 = {e2.mean:.6g} +- {e2.std_error:.2g}")
    print(f"truncation bias bound = {e1.truncation_bias_bound:.3g}; "
          f"max overshoot = {float(np.max(res.max_overshoot)):.4g}; "
          f"max post-0 increment = {float(np.max(res.max_increment)):.4g}")
    if args.out:
        rows = [(i, res.payoff1[i], res.payoff2[i], res.y1_final[i],
                 res.y2_final[i], res.max_increment[i],
                 res.max_overshoot[i], res.x_final[i])
                for i in range(e1.n)]
        _write_csv(args.out, params,
                   ["path", "payoff1", "payoff2", "y1_final", "y2_final",
                    "max_increment", "max_overshoot", "x_final"],
                   rows, seed=args.seed)
        print(f"wrote per-path summary to {args.out}")
    return 0


def cmd_nash_check(args) -> int:
    from .simulate import Deviation, SimConfig, Simulator
    from .value import ValueField

    params = _load_params(args)
    psi, bnd, mgrid = _solved(params, args.n, args.anchor)
    vf = ValueField(params, psi, bnd, mgrid)
    cfg = SimConfig(dt=args.dt, n_paths=args.paths, seed=args.seed,
                    horizon=args.horizon)
    sim = Simulator(params, bnd, cfg)
    y0 = SimplexPoint(args.y1, args.y2).validate(params.theta)
    devs = [Deviation.parse(d) for d in (args.deviation or
            ["shift:0.05", "shift:-0.05", "shift:0.1", "shift:-0.1",
             "lump:0.05", "lump:0.1", "lump:0.2", "never"])]
    rep = sim.nash_test(args.x0, y0, vf, devs)
    if args.json:
        eq = rep["equilibrium"]
        out = {
            "x0": rep["x0"], "y0": rep["y0"],
            "payoff1": eq["payoff1"].mean, "se1": eq["payoff1"].std_error,
            "value1": eq["value1"], "abs_error1": eq["abs_error1"],
            "value_tolerance": eq["value_tolerance"],
            "deviations": rep["deviations"],
        }
        print(json.dumps(out))
        return 0
    eq = rep["equilibrium"]
    print(f"equilibrium: S1 = {eq['payoff1'].mean:.6g} +- {eq['payoff1'].std_error:.2g}, "
          f"V1 = {eq['value1']:.6g}, |S1 - V1| = {eq['abs_error1']:.3g} "
          f"(tolerance {eq['value_tolerance']:.3g})")
    print(f"{'deviation':>12} {'S1(dev)':>12} {'diff':>12} {'se':>10}  verdict")
    for row in rep["deviations"]:
        ok = row["diff_mean"] <= 2 * row["diff_se"]
        print(f"{row['deviation']:>12} {row['payoff1_mean']:>12.6g} "
              f"{row['diff_mean']:>+12.6g} {row['diff_se']:>10.2g}  "
              f"{'ok' if ok else 'GAINS'}")
    return 0


def cmd_report(args) -> int:
    from .report import render_report

    params = _load_params(args)
    paths = render_report(params, args.out_dir, n=args.n, seed=args.seed)
    for pth in paths:
        print(f"wrote {pth}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_common(sp, config_required=False):
    sp.add_argument("--config", required=config_required,
                    help="JSON parameter file with keys k, mu, sigma, beta, rho, c, theta")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--json", action="store_true", help="machine-readable output")
    sp.add_argument("--n", type=int, default=400,
                    help="solver grid size (boundary and coefficient tables)")
    sp.add_argument("--anchor", choices=["cap-formula", "face-root"],
                    default="cap-formula",
                    help="diagonal anchor at C; face-root is a diagnostic mode")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="pvduopoly",
        description="Two-producer irreversible-investment game: solve the static "
                    "equilibrium, construct the free boundaries, evaluate the "
                    "candidate values, and verify by Monte Carlo simulation.")
    ap.add_argument("--version", action="version", version=f"pvduopoly {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("psi", help="evaluate the fundamental solution")
    _add_common(sp)
    sp.add_argument("--x", type=float, required=True)
    sp.add_argument("--order", type=int, default=0, choices=(0, 1, 2, 3))
    for name in _PARAM_FLAGS:
        sp.add_argument(f"--{name}", type=float, default=None)
    sp.set_defaults(func=cmd_psi)

    sp = sub.add_parser("static-game", help="one-shot equilibrium and values")
    _add_common(sp, config_required=True)
    sp.add_argument("--x", type=float)
    sp.add_argument("--y1", type=float)
    sp.add_argument("--y2", type=float)
    sp.add_argument("--grid", type=int, default=None,
                    help="emit an n-point grid CSV instead of a single state")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_static_game)

    sp = sub.add_parser("boundary", help="solve the free boundary / coefficient grid")
    sp.add_argument("action", choices=["solve", "m"])
    _add_common(sp, config_required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_boundary)

    sp = sub.add_parser("value", help="candidate value grid / residual checks")
    sp.add_argument("action", choices=["grid", "check"])
    _add_common(sp, config_required=True)
    sp.add_argument("--out", default=None)
    sp.add_argument("--nx", type=int, default=41)
    sp.add_argument("--ny", type=int, default=60)
    sp.set_defaults(func=cmd_value)

    sp = sub.add_parser("simulate", help="simulate the reflected equilibrium strategy")
    _add_common(sp, config_required=True)
    sp.add_argument("--x0", type=float, required=True)
    sp.add_argument("--y1", type=float, required=True)
    sp.add_argument("--y2", type=float, required=True)
    sp.add_argument("--dt", type=float, default=1e-3)
    sp.add_argument("--paths", type=int, default=100000)
    sp.add_argument("--horizon", type=float, default=None)
    sp.add_argument("--antithetic", action="store_true")
    sp.add_argument("--deviation", default=None,
                    help="simulate a player-1 deviation: shift:<dx>, lump:<dy>, never")
    sp.add_argument("--out", default=None, help="per-path summary CSV")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("nash-check", help="paired deviation comparison")
    _add_common(sp, config_required=True)
    sp.add_argument("--x0", type=float, required=True)
    sp.add_argument("--y1", type=float, required=True)
    sp.add_argument("--y2", type=float, required=True)
    sp.add_argument("--dt", type=float, default=1e-3)
    sp.add_argument("--paths", type=int, default=100000)
    sp.add_argument("--horizon", type=float, default=None)
    sp.add_argument("--deviation", action="append", default=None,
                    help="repeatable; defaults to the full reference family")
    sp.set_defaults(func=cmd_nash_check)

    sp = sub.add_parser("report", help="render figures and CSVs into a directory")
    _add_common(sp, config_required=True)
    sp.add_argument("--out-dir", required=True)
    sp.set_defaults(func=cmd_report)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        ap.print_usage(sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
