"""Free boundary of the continuous game and the option-value coefficient grid.

The boundary F for the player with the smaller installed capacity is pinned
by three ingredients:

* an exact capacity-cap anchor at the simplex midpoint C = (theta/2, theta/2),
* a scalar ODE along the diagonal OC for the shifted boundary
  Ftilde(y) = F(y) + beta*(y1+y2), obtained by requiring the coefficient
  implied by the second-order (price) smooth fit to also satisfy the
  diagonal matching condition of the coefficient ODEs,
* root-solved anchors on the far face AB where the option-value coefficient
  vanishes.

Between the diagonal and the AB face the boundary is under-determined; this
module represents it by a monotone blend between the two anchor curves
(monotone cubic along each curve, a tunable convex weight across), checks
strict monotonicity on a grid, and reports violations instead of hiding
them. The midpoint anchor and the AB roots are genuinely inconsistent with
each other, so the AB anchors are tapered into the midpoint value over a
configurable strip; the untapered mismatch is surfaced as the ``c_gap``
diagnostic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .errors import AdmissibilityError, BracketError, OdeSingularityError
from .params import EPS_GEOM, ModelParams, SimplexPoint
from .psi import PsiEvaluator

_BLOWUP = 1e6


def r_tilde(params: ModelParams, x, y1, y2):
    """Marginal no-installation revenue x/(rho+k) + (mu k - beta(rho+k)(y1+y2) - beta k y1)/(rho(rho+k)).

    Evaluated at the shifted boundary it equals the capacity-derivative of the
    perpetual revenue R_1 at the boundary itself.
    """
    p = params
    x = np.asarray(x, dtype=float)
    return x / (p.rho + p.k) + (
        p.mu * p.k - p.beta * (p.rho + p.k) * (np.asarray(y1) + np.asarray(y2))
        - p.beta * p.k * np.asarray(y1)) / (p.rho * (p.rho + p.k))


def second_order_fit_coeff(params: ModelParams, psi: PsiEvaluator, z, y1, y2):
    """Option-value coefficient implied by the joint value/slope fit in price.

    Forcing both the first- and second-order price derivatives of the value
    to match across the install boundary determines the coefficient
    algebraically in terms of the shifted boundary level z:

        (psi(z) + psi'(z) (c - r_tilde(z, y)) (rho+k)) / (-beta (rho+k) Q0(z)).
    """
    p = params
    ps = psi.psi_all(z)
    q0 = ps[0] * ps[2] - ps[1] ** 2
    w = p.c - r_tilde(p, z, y1, y2)
    return -(ps[0] + (p.rho + p.k) * ps[1] * w) / (p.beta * (p.rho + p.k) * q0)


def fit_root_function(params: ModelParams, psi: PsiEvaluator, z, y1, y2):
    """Numerator of the second-order fit coefficient; its root pins F on AB."""
    p = params
    ps = psi.psi_all(z)
    w = p.c - r_tilde(p, z, y1, y2)
    return ps[0] + (p.rho + p.k) * ps[1] * w


def diagonal_matching_rhs(params: ModelParams, psi: PsiEvaluator, s, z, m):
    """Directional derivative (d/dy1 + d/dy2) of the coefficient on the diagonal."""
    p = params
    ps = psi.psi_all(z)
    w = p.c - r_tilde(p, z, s, s)
    return (-2.0 * p.beta * (ps[1] / ps[0]) * m
            + (p.beta * p.k * np.asarray(s) + p.rho * (p.rho + p.k) * w)
            / (p.rho * (p.rho + p.k) * ps[0]))


def diagonal_rhs(params: ModelParams, psi: PsiEvaluator, s, z):
    """Slope of the shifted boundary along the diagonal, (d/dy1+d/dy2) Ftilde.

    Derived by differentiating the second-order fit coefficient along the
    diagonal and equating with the diagonal matching condition. Written with
    the shorthands Q0 = psi psi'' - psi'^2, Q1 = psi' psi''' - psi''^2,
    Q0' = psi psi''' - psi' psi'' and W = c - r_tilde(z, (s,s)):

                 Q0 [ (4 rho + 3k) psi psi' + 2 rho (rho+k) psi'^2 W
                      + (beta k s + rho (rho+k) W) Q0 ]
        z' = beta ------------------------------------------------------
                 rho psi^2 [ Q0' + (rho+k) W Q1 ]
    """
    p = params
    ps = psi.psi_all(z)
    p0, p1, p2, p3 = ps[0], ps[1], ps[2], ps[3]
    q0 = p0 * p2 - p1 * p1
    q1 = p1 * p3 - p2 * p2
    q0p = p0 * p3 - p1 * p2
    w = p.c - r_tilde(p, z, s, s)
    denom = p.rho * p0 * p0 * (q0p + (p.rho + p.k) * w * q1)
    numer = q0 * ((4.0 * p.rho + 3.0 * p.k) * p0 * p1
                  + 2.0 * p.rho * (p.rho + p.k) * p1 * p1 * w
                  + (p.beta * p.k * np.asarray(s) + p.rho * (p.rho + p.k) * w) * q0)
    return p.beta * numer / denom


def f_tilde_at_cap(params: ModelParams) -> float:
    """Shifted boundary value at C: (c rho (rho+k) + beta (rho+k) theta - mu k)/rho."""
    p = params
    return (p.c * p.rho * (p.rho + p.k) + p.beta * (p.rho + p.k) * p.theta
            - p.mu * p.k) / p.rho


def f_at_cap(params: ModelParams) -> float:
    """Boundary value at C: (c rho (rho+k) + beta k theta - mu k)/rho."""
    p = params
    return (p.c * p.rho * (p.rho + p.k) + p.beta * p.k * p.theta
            - p.mu * p.k) / p.rho


@dataclass
class DiagonalSolution:
    """Tabulated diagonal restriction s -> Ftilde(s, s), ascending in s."""

    s: np.ndarray
    f_tilde: np.ndarray
    zprime: np.ndarray

    def __post_init__(self):
        self._ft = PchipInterpolator(self.s, self.f_tilde, extrapolate=True)
        self._zp = PchipInterpolator(self.s, self.zprime, extrapolate=True)

    @property
    def f(self) -> np.ndarray:
        return self.f_tilde - 2.0 * self.s * self._beta

    _beta: float = field(default=0.0)

    def f_tilde_at(self, s):
        return self._ft(np.clip(s, self.s[0], self.s[-1]))

    def zprime_at(self, s):
        return self._zp(np.clip(s, self.s[0], self.s[-1]))


def solve_diagonal(params: ModelParams, psi: PsiEvaluator, n: int = 400) -> DiagonalSolution:
    """Integrate the diagonal ODE from C down to the origin with fixed-step RK4.

    The step halves (down to h/64) when the denominator of the slope formula
    approaches zero; persisting blow-up or a non-monotone result aborts.
    """
    return _solve_diagonal_from(params, psi, n, f_tilde_at_cap(params))


def _solve_diagonal_from(params: ModelParams, psi: PsiEvaluator, n: int,
                         z_start: float) -> DiagonalSolution:
    if n < 2:
        raise ValueError("n must be at least 2")
    p = params
    half = 0.5 * p.theta
    h = half / n
    s_nodes = half - h * np.arange(n + 1)
    z_vals = np.empty(n + 1)
    zp_vals = np.empty(n + 1)
    z = z_start
    z_vals[0] = z
    zp_vals[0] = _rhs_checked(p, psi, half, z)

    for j in range(n):
        s_hi = s_nodes[j]
        target = s_nodes[j + 1]
        s_cur = s_hi
        step = h
        while s_cur > target + 1e-15:
            step = min(step, s_cur - target)
            try:
                z_new = _rk4_down(p, psi, s_cur, z, step)
            except OdeSingularityError:
                z_new = None
            if z_new is None or not np.isfinite(z_new):
                if step <= h / 64.0:
                    raise OdeSingularityError(
                        f"diagonal ODE singular near s = {s_cur:.6g} "
                        f"(step floor {h / 64.0:.3g} reached)")
                step *= 0.5
                continue
            z = z_new
            s_cur -= step
        z_vals[j + 1] = z
        zp_vals[j + 1] = _rhs_checked(p, psi, target, z)

    order = np.argsort(s_nodes)
    sol = DiagonalSolution(s_nodes[order], z_vals[order], zp_vals[order], _beta=p.beta)
    f_asc = sol.f_tilde - 2.0 * p.beta * sol.s
    if not np.all(np.diff(f_asc) > 0):
        j = int(np.argmin(np.diff(f_asc)))
        raise AdmissibilityError(
            f"diagonal boundary not strictly increasing near s = {sol.s[j]:.6g}")
    return sol


def _rhs_checked(params, psi, s, z):
    val = float(diagonal_rhs(params, psi, s, z))
    if not np.isfinite(val) or abs(val) > _BLOWUP:
        raise OdeSingularityError(f"diagonal slope blew up at s = {s:.6g}, z = {z:.6g}")
    return val


def _rk4_down(params, psi, s, z, hstep):
    k1 = _rhs_checked(params, psi, s, z)
    k2 = _rhs_checked(params, psi, s - 0.5 * hstep, z - 0.5 * hstep * k1)
    k3 = _rhs_checked(params, psi, s - 0.5 * hstep, z - 0.5 * hstep * k2)
    k4 = _rhs_checked(params, psi, s - hstep, z - hstep * k3)
    return z - hstep * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0


@dataclass(frozen=True)
class SideRoot:
    """Root-solved shifted boundary value on the AB face."""

    f_tilde: float
    f: float
    residual: float


def solve_side_ab(params: ModelParams, psi: PsiEvaluator, y: SimplexPoint) -> SideRoot:
    """Solve the vanishing-coefficient condition on the AB face for Ftilde.

    Valid on the capacity face y1 + y2 = theta where the option value is zero;
    the root is bracketed inside [mu - 10 s, mu + 10 s] with s the stationary
    price scale, then polished to 1e-10.
    """
    p = params
    if abs(y.y1 + y.y2 - p.theta) > 1e-9 * max(1.0, p.theta):
        raise ValueError("solve_side_ab requires a point on the capacity face AB")
    s = p.ou_scale
    lo, hi = p.mu - 10.0 * s, p.mu + 10.0 * s
    fn = lambda z: float(fit_root_function(p, psi, z, y.y1, y.y2))
    flo, fhi = fn(lo), fn(hi)
    if flo * fhi > 0:
        raise BracketError(
            f"no sign change for the AB root in [{lo:.6g}, {hi:.6g}] at y = {y}")
    root = brentq(fn, lo, hi, xtol=1e-12, rtol=4 * np.finfo(float).eps)
    resid = abs(fn(root))
    if resid > 1e-8 * float(psi.psi(root)):
        raise BracketError(f"AB root residual {resid:.3e} too large at y = {y}")
    return SideRoot(f_tilde=float(root),
                    f=float(root - p.beta * (y.y1 + y.y2)),
                    residual=resid)


@dataclass
class BlendConfig:
    """Interpolation rule between the diagonal curve and the AB anchors.

    The boundary between the diagonal and the capacity face is the
    anti-diagonal extension of the diagonal curve plus a correction toward
    the AB roots, supported on the outer part of the transverse coordinate
    v = (y2-y1)/(theta-2 y1).  ``layer_start`` is where the correction ramp
    begins (must be >= 1/2: below that threshold v decreases in y1 wherever
    y2 < theta/2, and a vanishing ramp keeps the field monotone there by
    construction); ``w_power`` is the ramp exponent.
    """

    layer_start: float = 0.5
    w_power: float = 3.0


@dataclass
class AdmissibilityReport:
    n_checked: int
    n_violations: int
    worst_slope_y1: float
    worst_slope_y2: float
    locations: list


class BoundaryCurve:
    """Assembled boundary of the less-installed player on {y1 <= y2}.

    ``f1`` is that player's boundary, ``f2`` its reflection. All evaluators
    are vectorized and the object is immutable after construction.
    """

    def __init__(self, params: ModelParams, psi: PsiEvaluator,
                 diag: DiagonalSolution, side_u: np.ndarray, side_ft: np.ndarray,
                 blend: BlendConfig, diag_anchor: str = "cap-formula"):
        self.params = params
        self.psi = psi
        self.diag = diag
        self.side_u = side_u
        self.side_ft = side_ft
        self.blend = blend
        self.diag_anchor = diag_anchor
        if blend.layer_start < 0.5:
            raise ValueError("layer_start below 1/2 breaks monotonicity in y1")
        self._side = PchipInterpolator(side_u, side_ft, extrapolate=True)
        self._v0 = blend.layer_start
        self._q = blend.w_power
        self._ft_cap = float(diag.f_tilde_at(0.5 * params.theta))
        self.c_gap = float(side_ft[-1] - f_tilde_at_cap(params))
        if diag_anchor == "face-root":
            # diagnostic mode: the diagonal already ends at the face-root
            # value, so the AB correction degenerates; the interior field is
            # the pure anti-diagonal extension
            self._no_corr = True
        else:
            self._no_corr = False
            if np.any(np.diff(side_ft) <= 0) or np.any(side_ft - self._ft_cap < 0):
                # correction amplitude must be a nonnegative increasing curve
                # for the construction to be monotone; surface it loudly
                raise AdmissibilityError(
                    "AB anchors not increasing above the midpoint value; "
                    "the blended boundary would lose monotonicity")

    # -- blend machinery --------------------------------------------------

    def _ramp(self, v):
        t = np.clip((v - self._v0) / (1.0 - self._v0), 0.0, 1.0)
        return t ** self._q

    def f_tilde_upper(self, y1, y2):
        """Shifted boundary field on the closed half {0 <= y1 <= y2, y1+y2 <= theta}.

        Anti-diagonal extension of the diagonal curve plus a capacity-face
        correction toward the AB roots; exactly the diagonal table on OC and
        exactly the root curve on AB (the midpoint C keeps its exact anchor).
        """
        th = self.params.theta
        y1 = np.asarray(y1, dtype=float)
        y2 = np.asarray(y2, dtype=float)
        run = th - 2.0 * y1
        v = np.where(run > 1e-14, (y2 - y1) / np.where(run > 1e-14, run, 1.0), 0.0)
        v = np.clip(v, 0.0, 1.0)
        base = self.diag.f_tilde_at(0.5 * (y1 + y2))
        if self._no_corr:
            return base + 0.0 * v
        corr = np.maximum(self._side(np.minimum(y1, 0.5 * th)) - self._ft_cap, 0.0)
        return base + self._ramp(v) * corr

    # -- public boundary evaluators ---------------------------------------

    def f1(self, y1, y2):
        """Boundary of player 1 on its half {y1 <= y2}."""
        y1 = np.asarray(y1, dtype=float)
        y2 = np.asarray(y2, dtype=float)
        if np.any(y1 > y2 + 1e-9):
            raise ValueError("f1 is defined on the half {y1 <= y2}")
        val = self.f_tilde_upper(y1, y2) - self.params.beta * (y1 + y2)
        return val if val.ndim else float(val)

    def f2(self, y1, y2):
        """Boundary of player 2 on its half {y2 <= y1}; the reflection of f1."""
        return self.f1(y2, y1)

    def f_diag(self, s):
        s = np.asarray(s, dtype=float)
        val = self.diag.f_tilde_at(s) - 2.0 * self.params.beta * s
        return val if val.ndim else float(val)

    def f_diag_inverse(self, x):
        """Inverse of the diagonal restriction, clipped to [0, theta/2]."""
        th = self.params.theta
        x = np.asarray(x, dtype=float)
        lo = np.zeros_like(x, dtype=float)
        hi = np.full_like(x, 0.5 * th, dtype=float)
        below = x <= self.f_diag(0.0)
        above = x >= self.f_diag(0.5 * th)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            gt = self.f_diag(mid) < x
            lo = np.where(gt, mid, lo)
            hi = np.where(gt, hi, mid)
        out = np.where(below, 0.0, np.where(above, 0.5 * th, 0.5 * (lo + hi)))
        return out if out.ndim else float(out)

    def section_inverse(self, x, r):
        """Solve f1(t, r) = x for t in [0, min(r, theta - r)] (vectorized)."""
        th = self.params.theta
        x, r = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(r, dtype=float))
        t_hi = np.minimum(r, th - r)
        lo = np.zeros_like(t_hi)
        hi = t_hi.copy()
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            gt = self.f_tilde_upper(mid, r) - self.params.beta * (mid + r) < x
            lo = np.where(gt, mid, lo)
            hi = np.where(gt, hi, mid)
        return 0.5 * (lo + hi)

    def f_bold_inverse(self, x, r):
        """Four-branch piecewise inverse: target level given price x and opponent r.

        Non-decreasing in x, non-increasing in r, capped at theta/2 and at the
        remaining capacity theta - r; identically zero below the section foot.
        """
        th = self.params.theta
        x, r = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(r, dtype=float))
        scalar = x.ndim == 0
        x = np.atleast_1d(x).astype(float)
        r = np.atleast_1d(r).astype(float)
        r = np.clip(r, 0.0, th)
        cap = np.minimum(0.5 * th, th - r)
        t_hi = np.minimum(r, th - r)
        f_foot = self.f_tilde_upper(np.zeros_like(r), r) - self.params.beta * r
        f_mid = self.f_tilde_upper(t_hi, r) - self.params.beta * (t_hi + r)
        f_cap = np.where(r <= 0.5 * th, self.f_diag(0.5 * th), f_mid)

        out = np.zeros_like(x)
        sec = (x >= f_foot) & (x <= f_mid)
        if np.any(sec):
            out[sec] = self.section_inverse(x[sec], r[sec])
        dia = (r <= 0.5 * th) & (x > f_mid) & (x <= f_cap)
        if np.any(dia):
            out[dia] = np.clip(self.f_diag_inverse(x[dia]), r[dia], 0.5 * th)
        hi = x > f_cap
        out[hi] = cap[hi]
        out = np.minimum(out, cap)
        if scalar:
            return float(out[0])
        return out

    def initial_push(self, x, y1, y2):
        """Time-0 lump targets: each player pushes to the inverse at the
        opponent's pre-jump level; returns post-jump (Y1, Y2)."""
        t1 = np.maximum(self.f_bold_inverse(x, y2), y1)
        t2 = np.maximum(self.f_bold_inverse(x, y1), y2)
        return t1, t2

    def threshold_price(self, y_own, y_opp):
        """Price level at which the player at y_own starts installing.

        Infinite in the saturation component (y_own >= theta/2) and once
        capacity is exhausted.
        """
        th = self.params.theta
        y_own = np.asarray(y_own, dtype=float)
        y_opp = np.asarray(y_opp, dtype=float)
        out = np.full(np.broadcast(y_own, y_opp).shape, np.inf)
        y_own, y_opp = np.broadcast_arrays(y_own, y_opp)
        active = (y_own < 0.5 * th - 1e-15) & (y_own + y_opp < th - 1e-12)
        prol = active & (y_own >= y_opp)
        free = active & (y_own < y_opp)
        if np.any(prol):
            out[prol] = self.f_diag(y_own[prol])
        if np.any(free):
            out[free] = (self.f_tilde_upper(y_own[free], y_opp[free])
                         - self.params.beta * (y_own[free] + y_opp[free]))
        return out

    def lipschitz_kappa(self, n: int = 100) -> float:
        """1 / (minimum boundary slope) over a probe grid; Lipschitz constant
        of the piecewise inverse in the price argument."""
        th = self.params.theta
        s = np.linspace(0.0, 0.5 * th, n)
        dmin = np.min(np.diff(self.f_diag(s)) / np.diff(s))
        rs = np.linspace(1e-3 * th, th * (1 - 1e-3), n)
        for r in rs:
            t_hi = min(r, th - r)
            if t_hi < 4e-3 * th:
                continue
            t = np.linspace(0.0, t_hi, n)
            f = self.f_tilde_upper(t, np.full_like(t, r)) - self.params.beta * (t + r)
            dmin = min(dmin, np.min(np.diff(f) / np.diff(t)))
        if dmin <= 0:
            raise AdmissibilityError("boundary slope non-positive on probe grid")
        return float(1.0 / dmin)

    def admissibility_report(self, n: int = 201) -> AdmissibilityReport:
        """Check strict increase of F in each variable at grid nodes.

        The midpoint C itself carries the exact cap anchor while the AB roots
        approach a strictly larger value (the ``c_gap`` diagnostic); node
        pairs straddling that one-point mismatch are reported like any other.
        """
        th = self.params.theta
        h = th / (n - 1)
        g = np.linspace(0.0, th, n)
        y1g, y2g = np.meshgrid(g, g, indexing="ij")
        mask = (y1g <= y2g + 1e-12) & (y1g + y2g <= th + 1e-12)
        f = np.full_like(y1g, np.nan)
        f[mask] = self.f_tilde_upper(y1g[mask], y2g[mask]) \
            - self.params.beta * (y1g[mask] + y2g[mask])
        viol = []
        d1 = (f[1:, :] - f[:-1, :]) / h
        d2 = (f[:, 1:] - f[:, :-1]) / h
        bad1 = np.argwhere(np.isfinite(d1) & (d1 <= 0))
        bad2 = np.argwhere(np.isfinite(d2) & (d2 <= 0))
        for i, j in bad1[:32]:
            viol.append(("y1", g[i], g[j], float(d1[i, j])))
        for i, j in bad2[:32]:
            viol.append(("y2", g[i], g[j], float(d2[i, j])))
        worst1 = float(np.nanmin(d1)) if np.isfinite(d1).any() else math.nan
        worst2 = float(np.nanmin(d2)) if np.isfinite(d2).any() else math.nan
        n_checked = int(np.isfinite(d1).sum() + np.isfinite(d2).sum())
        return AdmissibilityReport(n_checked, len(bad1) + len(bad2), worst1, worst2, viol)


def solve_boundary(params: ModelParams, psi: PsiEvaluator, n: int = 400,
                   blend: BlendConfig | None = None,
                   diag_anchor: str = "cap-formula") -> BoundaryCurve:
    """Solve diagonal + AB anchors and assemble the interpolated boundary.

    ``diag_anchor`` selects the value at the midpoint C from which the
    diagonal ODE is integrated: "cap-formula" (the default and the contract)
    uses the exact capacity-cap expression; "face-root" is a diagnostic mode
    that instead starts from the vanishing-coefficient root at C (the two
    anchors are genuinely inconsistent; see the c_gap diagnostic). In the
    diagnostic mode the AB correction degenerates and the interior field is
    the anti-diagonal extension alone.
    """
    params.validate()
    if diag_anchor not in ("cap-formula", "face-root"):
        raise ValueError("diag_anchor must be 'cap-formula' or 'face-root'")
    m_side = max(n // 4, 32)
    us = np.linspace(0.0, 0.5 * params.theta, m_side + 1)
    ft = np.empty_like(us)
    for i, u in enumerate(us):
        ft[i] = solve_side_ab(params, psi, SimplexPoint(u, params.theta - u)).f_tilde
    if diag_anchor == "face-root":
        diag = _solve_diagonal_from(params, psi, n, float(ft[-1]))
    else:
        diag = solve_diagonal(params, psi, n=n)
    return BoundaryCurve(params, psi, diag, us, ft, blend or BlendConfig(),
                         diag_anchor=diag_anchor)


# ---------------------------------------------------------------------------
# option-value coefficient grid
# ---------------------------------------------------------------------------


def _ode1_rhs(params, psi, bnd, y1, y2, m):
    """d m / d y1 on the upper half from the own-capacity smooth fit."""
    p = params
    ft = bnd.f_tilde_upper(y1, y2)
    ps = psi.psi_all(ft)
    w = p.c - r_tilde(p, ft, y1, y2)
    return -p.beta * (ps[1] / ps[0]) * m + w / ps[0]


def _ode2_rhs(params, psi, bnd, y1, y2, m):
    """d m / d y2 on the lower half from the opponent-capacity fit."""
    p = params
    ft = bnd.f_tilde_upper(y2, y1)  # reflected field
    ps = psi.psi_all(ft)
    return (-p.beta * (ps[1] / ps[0]) * m
            + p.beta * p.k * np.asarray(y1) / (p.rho * (p.rho + p.k) * ps[0]))


def _ode3_rhs(params, psi, bnd, s, m):
    """(d/dy1 + d/dy2) m on the diagonal."""
    p = params
    ft = bnd.diag.f_tilde_at(s)
    ps = psi.psi_all(ft)
    w = p.c - r_tilde(p, ft, s, s)
    return (-2.0 * p.beta * (ps[1] / ps[0]) * m
            + (p.beta * p.k * np.asarray(s) + p.rho * (p.rho + p.k) * w)
            / (p.rho * (p.rho + p.k) * ps[0]))


class MGrid:
    """Option-value coefficient tabulated on the triangular grid step theta/n.

    Node (i, j) is y = (i h, j h). The coefficient is continuous across the
    diagonal; its gradient is one-sided there, so the analytic gradients are
    stored separately per half alongside finite-difference transverse ones.
    """

    def __init__(self, params, h, m, dm1_upper, dm2_lower, dm1_lower, dm2_upper,
                 m_diag, diagnostics):
        self.params = params
        self.h = h
        self.n = m.shape[0] - 1
        self.m = m
        self.dm1_upper = dm1_upper
        self.dm2_lower = dm2_lower
        self.dm1_lower = dm1_lower
        self.dm2_upper = dm2_upper
        self.m_diag = m_diag
        self.diagnostics = diagnostics
        for arr in (m, dm1_upper, dm2_lower, dm1_lower, dm2_upper, m_diag):
            arr.setflags(write=False)

    def _interp(self, table, y1, y2, upper: bool):
        """Triangle-aware linear interpolation that never crosses the diagonal
        kink or the capacity face."""
        th = self.params.theta
        n, h = self.n, self.h
        y1 = np.clip(np.asarray(y1, dtype=float), 0.0, th)
        y2 = np.clip(np.asarray(y2, dtype=float), 0.0, th)
        if not upper:
            y1, y2 = y2, y1
            table = table.T
        i0 = np.clip((y1 / h).astype(int), 0, n - 1)
        j0 = np.clip((y2 / h).astype(int), 0, n - 1)
        # keep the cell inside the closed upper half
        j0 = np.maximum(j0, i0)
        shift = i0 + j0 >= n
        j0 = np.where(shift & (j0 > i0), j0 - 1, j0)
        i0 = np.where(i0 + j0 >= n, i0 - 1, i0)
        a = np.clip(y1 / h - i0, 0.0, 1.0)
        b = np.clip(y2 / h - j0, 0.0, 1.0)
        diag_cell = i0 == j0
        ab_cell = i0 + j0 == n - 1
        m00 = table[i0, j0]
        m01 = table[i0, j0 + 1]
        m11 = table[i0 + 1, j0 + 1]
        m10 = table[i0 + 1, j0]
        # interior bilinear
        val = (m00 * (1 - a) * (1 - b) + m10 * a * (1 - b)
               + m01 * (1 - a) * b + m11 * a * b)
        # diagonal cells: triangle (0,0)-(0,1)-(1,1), valid for a <= b
        tri_d = m00 * (1 - b) + m01 * (b - a) + m11 * a
        val = np.where(diag_cell & ~ab_cell, tri_d, val)
        # capacity-face cells: triangle (0,0)-(1,0)-(0,1), valid for a + b <= 1
        tri_ab = m00 * (1 - a - b) + m10 * a + m01 * b
        val = np.where(ab_cell, tri_ab, val)
        return val

    def value(self, y1, y2):
        """Coefficient at arbitrary simplex points (continuous across the diagonal)."""
        y1 = np.asarray(y1, dtype=float)
        y2 = np.asarray(y2, dtype=float)
        up = y1 <= y2
        val = np.where(up,
                       self._interp(self.m, y1, y2, upper=True),
                       self._interp(self.m, y1, y2, upper=False))
        return val if val.ndim else float(val)

    def grad(self, y1, y2):
        """One-sided gradient (d/dy1, d/dy2) taken from the containing half."""
        y1 = np.asarray(y1, dtype=float)
        y2 = np.asarray(y2, dtype=float)
        up = y1 <= y2
        g1 = np.where(up,
                      self._interp(self.dm1_upper, y1, y2, upper=True),
                      self._interp(self.dm1_lower, y1, y2, upper=False))
        g2 = np.where(up,
                      self._interp(self.dm2_upper, y1, y2, upper=True),
                      self._interp(self.dm2_lower, y1, y2, upper=False))
        return g1, g2


def solve_m(params: ModelParams, psi: PsiEvaluator, bnd: BoundaryCurve,
            n: int = 400) -> MGrid:
    """Integrate the coefficient characteristics over both halves of the simplex.

    Order: the diagonal line from C (zero there), then horizontal
    characteristics across the upper half (diagonal or capacity-face data),
    then vertical characteristics across the lower half. Characteristic
    sweeps advance all rows of equal progress together, so the psi quadrature
    is evaluated on vectors.
    """
    if n % 2:
        raise ValueError("n must be even so theta/2 is a grid node")
    p = params
    h = p.theta / n
    half = n // 2

    # diagonal values by RK4 from C toward the origin
    m_diag = np.empty(half + 1)
    m_diag[half] = 0.0
    cur = 0.0
    for i in range(half, 0, -1):
        s = i * h
        k1 = _ode3_rhs(p, psi, bnd, s, cur)
        k2 = _ode3_rhs(p, psi, bnd, s - 0.5 * h, cur - 0.5 * h * k1)
        k3 = _ode3_rhs(p, psi, bnd, s - 0.5 * h, cur - 0.5 * h * k2)
        k4 = _ode3_rhs(p, psi, bnd, s - h, cur - h * k3)
        cur = cur - h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        m_diag[i - 1] = cur

    m = np.full((n + 1, n + 1), np.nan)
    js = np.arange(n + 1)
    starts_up = np.minimum(js, n - js)
    for j in range(n + 1):
        m[starts_up[j], j] = m_diag[j] if j <= half else 0.0
    for i in range(half + 1, n + 1):
        m[i, n - i] = 0.0  # capacity-face data for the lower-half sweep

    # upper half: sweep y1 downward, all rows in lockstep
    for i in range(half, 0, -1):
        act = np.where(starts_up >= i)[0]
        y2v = act * h
        mv = m[i, act]
        if np.any(~np.isfinite(mv)):
            raise OdeSingularityError(f"uninitialized coefficient row at sweep {i}")
        y1a = i * h
        k1 = _ode1_rhs(p, psi, bnd, np.full_like(y2v, y1a), y2v, mv)
        k2 = _ode1_rhs(p, psi, bnd, np.full_like(y2v, y1a - 0.5 * h), y2v, mv - 0.5 * h * k1)
        k3 = _ode1_rhs(p, psi, bnd, np.full_like(y2v, y1a - 0.5 * h), y2v, mv - 0.5 * h * k2)
        k4 = _ode1_rhs(p, psi, bnd, np.full_like(y2v, y1a - h), y2v, mv - h * k3)
        new = mv - h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        if np.any(np.abs(new) > _BLOWUP):
            raise OdeSingularityError(f"coefficient blow-up in upper sweep at y1 = {y1a - h:.6g}")
        m[i - 1, act] = new

    # lower half: sweep y2 downward at fixed y1 columns
    for j in range(half, 0, -1):
        act = np.where((starts_up >= j))[0]
        y1v = act * h
        mv = m[act, j]
        y2a = j * h
        k1 = _ode2_rhs(p, psi, bnd, y1v, np.full_like(y1v, y2a), mv)
        k2 = _ode2_rhs(p, psi, bnd, y1v, np.full_like(y1v, y2a - 0.5 * h), mv - 0.5 * h * k1)
        k3 = _ode2_rhs(p, psi, bnd, y1v, np.full_like(y1v, y2a - 0.5 * h), mv - 0.5 * h * k2)
        k4 = _ode2_rhs(p, psi, bnd, y1v, np.full_like(y1v, y2a - h), mv - h * k3)
        new = mv - h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        if np.any(np.abs(new) > _BLOWUP):
            raise OdeSingularityError(f"coefficient blow-up in lower sweep at y2 = {y2a - h:.6g}")
        m[act, j - 1] = new

    # analytic one-sided gradients at nodes, finite differences transversally
    ii, jj = np.meshgrid(js, js, indexing="ij")
    upper = (ii <= jj) & (ii + jj <= n)
    lower = (jj <= ii) & (ii + jj <= n)
    dm1_up = np.full_like(m, np.nan)
    dm2_lo = np.full_like(m, np.nan)
    dm1_up[upper] = _ode1_rhs(p, psi, bnd, ii[upper] * h, jj[upper] * h, m[upper])
    dm2_lo[lower] = _ode2_rhs(p, psi, bnd, ii[lower] * h, jj[lower] * h, m[lower])
    dm2_up = _transverse_fd(m, h, upper, axis=1)
    dm1_lo = _transverse_fd(m, h, lower, axis=0)

    ab = ii + jj == n
    with np.errstate(invalid="ignore"):
        m_up = np.where(upper, m, np.nan)
        sat_band = upper & (jj * h >= 0.5 * p.theta)
        diagnostics = {
            "ab_max_abs": float(np.nanmax(np.abs(m[ab]))),
            "diag_jump_max": _diag_jump(p, psi, bnd, m_diag, h),
            # the exact midpoint anchor forces a positive diagonal slope of the
            # coefficient at C, so a small negative dip is structural; its
            # extent is reported here rather than silently clipped
            "m_min": float(np.nanmin(m_up)),
            "m_min_sat_band": float(np.nanmin(np.where(sat_band, m, np.nan))),
            "negative_fraction_upper": float(np.nanmean((m_up < -1e-12))),
        }
    return MGrid(p, h, m, dm1_up, dm2_lo, dm1_lo, dm2_up, m_diag, diagnostics)


def _transverse_fd(m, h, mask, axis):
    """Masked one-sided/central differences of a half-simplex table."""
    if axis == 0:
        return _transverse_fd(m.T, h, mask.T, axis=1).T
    pad_m = np.full((m.shape[0], m.shape[1] + 2), np.nan)
    pad_m[:, 1:-1] = np.where(mask, m, np.nan)
    up = pad_m[:, 2:]
    dn = pad_m[:, :-2]
    here = pad_m[:, 1:-1]
    ok_up = np.isfinite(up)
    ok_dn = np.isfinite(dn)
    with np.errstate(invalid="ignore"):
        central = (up - dn) / (2 * h)
        fwd = (up - here) / h
        bwd = (here - dn) / h
        out = np.where(ok_up & ok_dn, central,
                       np.where(ok_up, fwd, np.where(ok_dn, bwd, np.nan)))
    out[~mask] = np.nan
    return out


def _diag_jump(params, psi, bnd, m_diag, h):
    """Consistency of the diagonal directional derivative with the one-sided sums."""
    half = len(m_diag) - 1
    s = np.arange(1, half) * h
    mv = m_diag[1:half]
    lhs = _ode3_rhs(params, psi, bnd, s, mv)
    rhs = (_ode1_rhs(params, psi, bnd, s, s, mv)
           + _ode2_rhs(params, psi, bnd, s, s, mv))
    return float(np.max(np.abs(lhs - rhs))) if len(s) else 0.0
