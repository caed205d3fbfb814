"""Candidate value functions of the continuous game and residual diagnostics.

Player 1's candidate value on the joint waiting region is

    v1(x, y) = m1(y) * psi(x + beta*(y1+y2)) + R1(x, y),

extended to the four regions by pushing the state along the strategy inverse;
player 2's value is the reflection. The module computes the generator
residual, the smooth-fit residuals at the construction nodes, the diagonal
matching residual at C, and a set of reported (not asserted) diagnostics:
linear growth and price-derivative Lipschitz constants, the sign of the
own-capacity gradient inequality, and continuity across the two boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boundary import BoundaryCurve, MGrid, f_tilde_at_cap, r_tilde, solve_side_ab
from .params import ModelParams, SimplexPoint
from .psi import PsiEvaluator

REGION4 = ("W1W2", "I1W2", "W1I2", "I1I2")
_SUB = ("free", "prol", "sat")


@dataclass(frozen=True)
class RegionLabel4:
    label: str
    sub1: str | None   # waiting component of player 1, None if installing
    sub2: str | None


class ValueField:
    """Assembled candidate values V1, V2 over a solved boundary and coefficient grid."""

    def __init__(self, params: ModelParams, psi: PsiEvaluator,
                 boundary: BoundaryCurve, mgrid: MGrid):
        self.params = params
        self.psi = psi
        self.boundary = boundary
        self.mgrid = mgrid

    # -- closed-form pieces ----------------------------------------------

    def r_i(self, x, y1, y2, player: int):
        """Perpetual revenue of holding the current capacity forever."""
        p = self.params
        own = (y1, y2)[player - 1]
        val = (np.asarray(own, dtype=float)
               * (np.asarray(x, dtype=float) * p.rho + p.mu * p.k
                  - p.beta * p.k * (np.asarray(y1) + np.asarray(y2)))
               / (p.rho * (p.rho + p.k)))
        return val if val.ndim else float(val)

    def v_raw(self, x, y1, y2):
        """Player-1 candidate on the closed joint waiting region."""
        p = self.params
        u = np.asarray(x, dtype=float) + p.beta * (np.asarray(y1) + np.asarray(y2))
        m = self.mgrid.value(y1, y2)
        return m * self.psi.psi(u) + self.r_i(x, y1, y2, 1)

    # -- region classification -------------------------------------------

    def _wait(self, player: int, x, y1, y2):
        """Waiting-set membership and component code (0 free, 1 prol, 2 sat)."""
        p = self.params
        b = self.boundary
        x = np.asarray(x, dtype=float)
        own = np.asarray((y1, y2)[player - 1], dtype=float)
        opp = np.asarray((y2, y1)[player - 1], dtype=float)
        sat = own >= 0.5 * p.theta
        lo = np.minimum(own, opp)
        hi = np.maximum(own, opp)
        f_free = b.f_tilde_upper(lo, hi) - p.beta * (lo + hi)
        free = (own <= opp) & (x < f_free)
        prol = (own > opp) & ~sat & (x < b.f_diag(own))
        wait = sat | free | prol
        sub = np.where(sat, 2, np.where(own <= opp, 0, 1))
        return wait, sub

    def classify(self, x, y1, y2):
        """Region code 0..3 (W1W2, I1W2, W1I2, I1I2); scalar input gives labels."""
        x, y1, y2 = np.broadcast_arrays(
            *(np.asarray(v, dtype=float) for v in (x, y1, y2)))
        w1, s1 = self._wait(1, x, y1, y2)
        w2, s2 = self._wait(2, x, y1, y2)
        code = np.where(w1, 0, 1) + 2 * np.where(w2, 0, 1)
        if code.ndim == 0:
            return RegionLabel4(REGION4[int(code)],
                                _SUB[int(s1)] if bool(w1) else None,
                                _SUB[int(s2)] if bool(w2) else None)
        return code

    # -- the four-case value ----------------------------------------------

    def value(self, x, y1, y2, player: int = 1):
        """Candidate equilibrium value; player 2 is the exact reflection."""
        if player == 2:
            return self.value(x, y2, y1, player=1)
        x, y1, y2 = np.broadcast_arrays(
            *(np.asarray(v, dtype=float) for v in (x, y1, y2)))
        scalar = x.ndim == 0
        x, y1, y2 = (np.atleast_1d(v).ravel() for v in (x, y1, y2))
        w1, _ = self._wait(1, x, y1, y2)
        w2, _ = self._wait(2, x, y1, y2)
        b = self.boundary
        out = np.empty_like(x)

        ww = w1 & w2
        if np.any(ww):
            out[ww] = self.v_raw(x[ww], y1[ww], y2[ww])
        wi = w1 & ~w2          # player 2 installs
        if np.any(wi):
            t2 = b.f_bold_inverse(x[wi], y1[wi])
            out[wi] = self.v_raw(x[wi], y1[wi], np.maximum(t2, y2[wi]))
        iw = ~w1 & w2          # player 1 installs
        if np.any(iw):
            t1 = np.maximum(b.f_bold_inverse(x[iw], y2[iw]), y1[iw])
            out[iw] = self.v_raw(x[iw], t1, y2[iw]) \
                - self.params.c * (t1 - y1[iw])
        ii = ~w1 & ~w2
        if np.any(ii):
            t = np.maximum(b.f_bold_inverse(x[ii], y1[ii]), y1[ii])
            out[ii] = self.v_raw(x[ii], t, t) - self.params.c * (t - y1[ii])
        return float(out[0]) if scalar else out

    # -- residual diagnostics ----------------------------------------------

    def residual_pde(self, x, y1, y2):
        """Generator residual of the candidate on the joint waiting region.

        (sigma^2/2) Vxx + k(mu - beta(y1+y2) - x) Vx - rho V + x y1 computed
        from the analytic decomposition; the annuity part cancels exactly, so
        the residual isolates quadrature and table error.
        """
        p = self.params
        x = np.asarray(x, dtype=float)
        y1 = np.asarray(y1, dtype=float)
        y2 = np.asarray(y2, dtype=float)
        u = x + p.beta * (y1 + y2)
        ps = self.psi.psi_all(u)
        m = self.mgrid.value(y1, y2)
        drift = p.k * (p.mu - p.beta * (y1 + y2) - x)
        val = (0.5 * p.sigma ** 2 * m * ps[2]
               + drift * (m * ps[1] + y1 / (p.rho + p.k))
               - p.rho * (m * ps[0] + self.r_i(x, y1, y2, 1))
               + x * y1)
        return val if val.ndim else float(val)

    def residual_annuity(self, x, y1, y2):
        """Generator residual of the annuity alone; identically zero."""
        p = self.params
        x = np.asarray(x, dtype=float)
        drift = p.k * (p.mu - p.beta * (np.asarray(y1) + np.asarray(y2)) - x)
        return (drift * np.asarray(y1) / (p.rho + p.k)
                - p.rho * self.r_i(x, y1, y2, 1) + x * np.asarray(y1))

    def smooth_fit_residuals_at_nodes(self):
        """Own- and cross-capacity fit residuals at every construction node.

        Returns (max|dv1/dy1 - c| on the upper half at F1, max|dv1/dy2| on the
        lower half at F2); both are algebraic rearrangements of the
        characteristic ODEs, so they measure wiring, not discretization.
        """
        p = self.params
        mg = self.mgrid
        n, h = mg.n, mg.h
        ii, jj = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
        upper = (ii <= jj) & (ii + jj <= n)
        lower = (jj <= ii) & (ii + jj <= n)

        y1u, y2u = ii[upper] * h, jj[upper] * h
        ft1 = self.boundary.f_tilde_upper(y1u, y2u)
        ps1 = self.psi.psi_all(ft1)
        fit1 = (mg.dm1_upper[upper] * ps1[0]
                + p.beta * mg.m[upper] * ps1[1]
                + r_tilde(p, ft1, y1u, y2u)) - p.c

        y1l, y2l = ii[lower] * h, jj[lower] * h
        ft2 = self.boundary.f_tilde_upper(y2l, y1l)
        ps2 = self.psi.psi_all(ft2)
        dr1_dy2 = -p.beta * p.k * y1l / (p.rho * (p.rho + p.k))
        fit2 = (mg.dm2_lower[lower] * ps2[0]
                + p.beta * mg.m[lower] * ps2[1]
                + dr1_dy2)
        return float(np.max(np.abs(fit1))), float(np.max(np.abs(fit2)))

    def residual_smooth_fit(self, y1: float, y2: float):
        """Pointwise fit residuals at the ordered representatives of y.

        The own-capacity condition lives on the half {y1 <= y2} and the
        cross condition on its reflection, so the pair is evaluated at
        (min, max) and (max, min) respectively.
        """
        p = self.params
        lo, hi = min(y1, y2), max(y1, y2)
        ft1 = float(self.boundary.f_tilde_upper(lo, hi))
        ps1 = self.psi.psi_all(ft1)
        m = self.mgrid.value(lo, hi)
        g1, _ = self.mgrid.grad(lo, hi)
        r1 = g1 * ps1[0] + p.beta * m * ps1[1] + float(r_tilde(p, ft1, lo, hi)) - p.c
        ft2 = ft1  # reflection shares the shifted boundary value
        ps2 = ps1
        _, g2 = self.mgrid.grad(hi, lo)
        r2 = (g2 * ps2[0] + p.beta * self.mgrid.value(hi, lo) * ps2[1]
              - p.beta * p.k * hi / (p.rho * (p.rho + p.k)))
        return float(r1), float(r2)

    def diag_matching_residual(self) -> float:
        """Residual at C of the diagonal matching condition for the gradient sum."""
        p = self.params
        half = 0.5 * p.theta
        ftc = f_tilde_at_cap(p)
        ps = self.psi.psi_all(ftc)
        h = self.mgrid.h
        # one-sided gradient sum at C from the construction equations
        from .boundary import _ode1_rhs, _ode2_rhs
        gsum = float(_ode1_rhs(p, self.psi, self.boundary, half, half, 0.0)
                     + _ode2_rhs(p, self.psi, self.boundary, half, half, 0.0))
        return gsum + 2.0 * (float(r_tilde(p, ftc, half, half)) - p.c) / ps[0]

    def remark_inconsistency_check(self, x_override: float | None = None) -> float:
        """Evaluate the capacity-face gradient limit at the AB root.

        Returns x/(rho+k) + k(mu - beta*theta)/(rho(rho+k)) - c at the root of
        the vanishing-coefficient condition for y = (theta/4, 3 theta/4); a
        strictly positive value demonstrates that the full second-order fit
        cannot close (the own-gradient inequality fails in the limit).
        """
        p = self.params
        if x_override is None:
            y = SimplexPoint(0.25 * p.theta, 0.75 * p.theta)
            x_override = solve_side_ab(p, self.psi, y).f_tilde
        return (x_override / (p.rho + p.k)
                + p.k * (p.mu - p.beta * p.theta) / (p.rho * (p.rho + p.k)) - p.c)

    # -- reported probes ----------------------------------------------------

    def probe_box(self, nx: int = 41, ny: int = 60):
        """Default probe states: the OU band unioned with the boundary band."""
        p = self.params
        s = p.ou_scale
        f0 = float(self.boundary.f_diag(0.0))
        fc = float(self.boundary.f_diag(0.5 * p.theta))
        xs = np.unique(np.concatenate([
            np.linspace(p.mu - 4 * s, p.mu + 4 * s, nx),
            np.linspace(f0 - 1.0, fc + 1.0, nx)]))
        g = np.linspace(0.0, p.theta, ny)
        y1g, y2g = np.meshgrid(g, g, indexing="ij")
        keep = y1g + y2g <= p.theta
        return xs, y1g[keep], y2g[keep]

    def interior_ww_mask(self, x, y1, y2, margin: float):
        """States inside the joint waiting region with a price margin to both boundaries."""
        t1 = self.boundary.threshold_price(y1, y2)
        t2 = self.boundary.threshold_price(y2, y1)
        return x < np.minimum(t1, t2) - margin

    def pde_residual_summary(self, nx: int = 25, ny: int = 30):
        """Max and mean |generator residual| / (1+|x|) over interior probes."""
        xs, y1, y2 = self.probe_box(nx, ny)
        dx = np.min(np.diff(xs))
        best = {"max": 0.0, "mean": 0.0, "n": 0}
        tot, cnt, mx = 0.0, 0, 0.0
        for x in xs:
            mask = self.interior_ww_mask(x, y1, y2, 2 * dx)
            if not np.any(mask):
                continue
            r = np.abs(self.residual_pde(x, y1[mask], y2[mask])) / (1.0 + abs(x))
            mx = max(mx, float(np.max(r)))
            tot += float(np.sum(r))
            cnt += int(r.size)
        best["max"], best["mean"], best["n"] = mx, tot / max(cnt, 1), cnt
        return best

    def growth_constant(self) -> float:
        """Reported K with |V1| <= K(1+|x|) over the probe box."""
        xs, y1, y2 = self.probe_box()
        k = 0.0
        for x in xs:
            v = self.value(np.full_like(y1, x), y1, y2, 1)
            k = max(k, float(np.max(np.abs(v) / (1.0 + abs(x)))))
        return k

    def dx_lipschitz_constant(self, dx: float = 1e-3) -> float:
        """Reported L bounding |Vx(x) - Vx(x')| / |x - x'| via second differences."""
        xs, y1, y2 = self.probe_box(nx=25, ny=24)
        L = 0.0
        for x in xs:
            vm = self.value(np.full_like(y1, x - dx), y1, y2, 1)
            v0 = self.value(np.full_like(y1, x), y1, y2, 1)
            vp = self.value(np.full_like(y1, x + dx), y1, y2, 1)
            L = max(L, float(np.max(np.abs(vp - 2 * v0 + vm) / dx ** 2)))
        return L

    def dy2_in_install_region_check(self, step: float = 1e-4) -> float:
        """Max |dV1/dy2| over probes where player 2 installs; structurally zero."""
        p = self.params
        rng = np.random.default_rng(42)
        y1 = rng.uniform(0, 0.45 * p.theta, 200)
        y2 = rng.uniform(0, 0.45 * p.theta, 200)
        x = self.boundary.threshold_price(y2, y1) + rng.uniform(0.05, 0.8, 200)
        ok = np.isfinite(x) & (y2 + step * p.theta + y1 < p.theta)
        d = (self.value(x[ok], y1[ok], y2[ok] + step * p.theta, 1)
             - self.value(x[ok], y1[ok], y2[ok], 1)) / (step * p.theta)
        return float(np.max(np.abs(d))) if d.size else 0.0

    def value_minus_annuity_report(self):
        """min(V1 - R1) over the probe box with its location (reported)."""
        xs, y1, y2 = self.probe_box(nx=21, ny=24)
        worst = (np.inf, None)
        for x in xs:
            d = (self.value(np.full_like(y1, x), y1, y2, 1)
                 - self.r_i(x, y1, y2, 1))
            i = int(np.argmin(d))
            if d[i] < worst[0]:
                worst = (float(d[i]), (float(x), float(y1[i]), float(y2[i])))
        return worst

    def dy1_gradient_inequality_report(self, n: int = 40):
        """max(dV1/dy1 - c) over interior joint-waiting probes (reported).

        The construction cannot guarantee the inequality globally; positive
        values are returned with their location instead of being asserted.
        """
        p = self.params
        xs, y1, y2 = self.probe_box(nx=n, ny=n)
        worst = (-np.inf, None)
        for x in xs:
            mask = self.interior_ww_mask(x, y1, y2, 0.05)
            if not np.any(mask):
                continue
            u = x + p.beta * (y1[mask] + y2[mask])
            ps = self.psi.psi_all(u)
            m = self.mgrid.value(y1[mask], y2[mask])
            g1, _ = self.mgrid.grad(y1[mask], y2[mask])
            dr = (x * p.rho + p.mu * p.k - p.beta * p.k * (y1[mask] + y2[mask])
                  - p.beta * p.k * y1[mask]) / (p.rho * (p.rho + p.k))
            d = g1 * ps[0] + p.beta * m * ps[1] + dr - p.c
            i = int(np.argmax(d))
            if d[i] > worst[0]:
                worst = (float(d[i]), (float(x), float(y1[mask][i]), float(y2[mask][i])))
        return worst

    def interface_continuity(self, n: int = 60):
        """Max |V| jump across each boundary graph at paired probe states."""
        p = self.params
        b = self.boundary
        eps = 1e-7
        s = np.linspace(0.02 * p.theta, 0.48 * p.theta, n)
        # player-1 boundary on the upper half: vary x across F1(y)
        y1 = 0.5 * s
        y2 = np.minimum(s + 0.2 * p.theta, p.theta - y1 - 0.01)
        f1 = b.f_tilde_upper(y1, y2) - p.beta * (y1 + y2)
        jump1 = np.abs(self.value(f1 + eps, y1, y2, 1) - self.value(f1 - eps, y1, y2, 1))
        # player-2 boundary: reflected states
        f2 = f1
        jump2 = np.abs(self.value(f2 + eps, y2, y1, 1) - self.value(f2 - eps, y2, y1, 1))
        return float(np.max(jump1)), float(np.max(jump2))

    def dxx_jump_across_f1(self, n: int = 20):
        """Reported second-derivative jump across the own boundary (expected nonzero)."""
        p = self.params
        b = self.boundary
        s = np.linspace(0.05 * p.theta, 0.4 * p.theta, n)
        y1, y2 = 0.4 * s, 0.4 * s + 0.3 * p.theta
        f1 = b.f_tilde_upper(y1, y2) - p.beta * (y1 + y2)
        h = 1e-3
        jumps = []
        for xi, a, bb in zip(f1, y1, y2):
            def dxx(x0):
                v = [self.value(x0 + d, a, bb, 1) for d in (-h, 0.0, h)]
                return (v[0] - 2 * v[1] + v[2]) / h ** 2
            jumps.append(abs(dxx(xi + 3 * h) - dxx(xi - 3 * h)))
        return float(np.max(jumps))
