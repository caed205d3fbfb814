"""Report rendering: figures plus the CSVs behind them, written to a directory."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .boundary import fit_root_function, solve_boundary, solve_m
from .params import ModelParams
from .static_game import REGION_LABELS, a_inverse, static_equilibrium, static_region
from .value import ValueField


def render_report(params: ModelParams, out_dir: str, n: int = 400,
                  seed: int = 0) -> list[str]:
    """Solve the model and write boundary/region/coefficient/value figures."""
    from .cli import _psi_for, _write_csv

    os.makedirs(out_dir, exist_ok=True)
    written = []
    psi = _psi_for(params)
    bnd = solve_boundary(params, psi, n=n)
    mgrid = solve_m(params, psi, bnd, n=n)
    vf = ValueField(params, psi, bnd, mgrid)
    th = params.theta

    def save(fig, name):
        path = os.path.join(out_dir, name)
        fig.savefig(path, dpi=150, bbox_inches="tight")
        plt.close(fig)
        written.append(path)

    # -- boundary curves --------------------------------------------------
    s = bnd.diag.s
    f_diag = bnd.diag.f_tilde - 2 * params.beta * s
    one_step = a_inverse(params, 1.5 * s)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(s, f_diag, label="diagonal boundary F(s,s)")
    ax.plot(s, bnd.diag.f_tilde, "--", label="shifted boundary")
    ax.plot(bnd.side_u, bnd.side_ft - params.beta * th, "o", ms=3,
            label="capacity-face anchors")
    ax.plot(s, one_step, ":", label="one-shot boundary")
    ax.set_xlabel("s (diagonal capacity)")
    ax.set_ylabel("price")
    ax.legend(fontsize=8)
    ax.set_title("Installation boundaries")
    save(fig, "boundary.png")
    rows = [(si, fi, fti) for si, fi, fti in zip(s, f_diag, bnd.diag.f_tilde)]
    csv = os.path.join(out_dir, "boundary.csv")
    _write_csv(csv, params, ["s", "F", "Ftilde"], rows)
    written.append(csv)

    # -- static-game regions ----------------------------------------------
    g = np.linspace(0.0, th, 161)
    y1g, y2g = np.meshgrid(g, g, indexing="ij")
    keep = y1g + y2g <= th
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.6), sharey=True)
    for ax, a_level in zip(axes, (0.3, 0.6, 0.85)):
        x = float(a_inverse(params, a_level * th))
        code = np.full(y1g.shape, -1.0)
        code[keep], _ = static_region(params, np.full(keep.sum(), x),
                                      y1g[keep], y2g[keep])
        masked = np.ma.masked_where(~keep, code)
        ax.pcolormesh(g, g, masked.T, vmin=0, vmax=3, cmap="viridis",
                      shading="auto")
        ax.set_title(f"A(x) = {a_level:g} theta")
        ax.set_xlabel("y1")
    axes[0].set_ylabel("y2")
    fig.suptitle("One-shot regions (0=WW 1=IW 2=WI 3=II)")
    save(fig, "static_regions.png")
    xs = float(a_inverse(params, 0.6 * th))
    i1, i2 = static_equilibrium(params, xs, y1g[keep], y2g[keep])
    csv = os.path.join(out_dir, "static_regions.csv")
    code, _ = static_region(params, np.full(keep.sum(), xs), y1g[keep], y2g[keep])
    _write_csv(csv, params, ["x", "y1", "y2", "region", "i1", "i2"],
               [(xs, a, b, REGION_LABELS[int(cd)], u, v)
                for a, b, cd, u, v in zip(y1g[keep], y2g[keep], code, i1, i2)])
    written.append(csv)

    # -- option-value coefficient -----------------------------------------
    m_masked = np.ma.masked_invalid(mgrid.m)
    fig, ax = plt.subplots(figsize=(5, 4))
    extent = [0, th, 0, th]
    im = ax.imshow(m_masked.T, origin="lower", extent=extent, aspect="equal",
                   cmap="RdBu", vmin=-np.nanmax(np.abs(mgrid.m)),
                   vmax=np.nanmax(np.abs(mgrid.m)))
    fig.colorbar(im, ax=ax, label="coefficient")
    ax.plot([0, th], [th, 0], "k-", lw=0.6)
    ax.set_xlabel("y1")
    ax.set_ylabel("y2")
    ax.set_title("Option-value coefficient")
    save(fig, "m1.png")

    # -- face-root function -------------------------------------------------
    zz = np.linspace(params.mu - 1.0, params.mu + 4.0 * params.ou_scale + 2.0, 400)
    u_of_z = fit_root_function(params, psi, zz, 0.25 * th, 0.75 * th)
    fig, ax = plt.subplots(figsize=(5.5, 3.6))
    ax.plot(zz, u_of_z)
    ax.axhline(0.0, color="k", lw=0.6)
    root = None
    sgn = np.sign(u_of_z)
    flips = np.where(np.diff(sgn) != 0)[0]
    if len(flips):
        i = flips[0]
        root = zz[i] - u_of_z[i] * (zz[i + 1] - zz[i]) / (u_of_z[i + 1] - u_of_z[i])
        ax.axvline(root, color="r", ls="--", lw=0.8,
                   label=f"root ~ {root:.4f}")
        ax.legend()
    ax.set_xlabel("shifted price")
    ax.set_ylabel("fit function")
    ax.set_title("Vanishing-coefficient condition on the capacity face")
    save(fig, "u_root.png")
    csv = os.path.join(out_dir, "u_root.csv")
    _write_csv(csv, params, ["z", "U"], list(zip(zz, u_of_z)))
    written.append(csv)

    # -- value slice ---------------------------------------------------------
    xs = np.linspace(params.mu - 3 * params.ou_scale,
                     float(bnd.f_diag(0.5 * th)) + 1.0, 200)
    fig, ax = plt.subplots(figsize=(5.5, 3.6))
    for (a, b) in ((0.1 * th, 0.2 * th), (0.25 * th, 0.25 * th)):
        v = vf.value(xs, np.full_like(xs, a), np.full_like(xs, b), 1)
        r = vf.r_i(xs, np.full_like(xs, a), np.full_like(xs, b), 1)
        ax.plot(xs, v, label=f"V1 at y=({a:g},{b:g})")
        ax.plot(xs, r, ":", lw=0.8, label=f"hold-forever at y=({a:g},{b:g})")
    ax.set_xlabel("price")
    ax.set_ylabel("value")
    ax.legend(fontsize=7)
    ax.set_title("Candidate value vs perpetual-revenue floor")
    save(fig, "value_slice.png")
    csv = os.path.join(out_dir, "value_slice.csv")
    v1 = vf.value(xs, np.full_like(xs, 0.1 * th), np.full_like(xs, 0.2 * th), 1)
    _write_csv(csv, params, ["x", "V1_y_0.1_0.2"], list(zip(xs, v1)))
    written.append(csv)

    return written
