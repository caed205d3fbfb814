"""Monte Carlo simulation of the reflected equilibrium strategy.

The controlled price follows Euler-Maruyama; after each price step the
installation controls are refreshed by the running supremum of the strategy
inverse (reflect-after-step). One fast path kernel serves the equilibrium
strategy and every unilateral deviation of player 1:

* ``shift``  - player 1 reflects off a price-shifted boundary, realized as
               an argument shift of the inverse;
* ``lump``   - an extra time-0 installation on top of the equilibrium lump;
* ``never``  - player 1 never installs.

Deviation arms and the equilibrium arm share noise exactly (counter-based
Philox streams keyed by seed, scenario and chunk), so paired differences
carry the common-random-number variance reduction. The kernel works off two
prebuilt float32 tables: the bilinear strategy-inverse table and an install
threshold table whose 3x3 erosion makes the per-step skip test safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .boundary import BoundaryCurve
from .errors import ParameterError
from .params import EPS_GEOM, ModelParams, SimplexPoint

_BIG = 1e18
_TAIL_TOL = 1e-4


@dataclass(frozen=True)
class SimConfig:
    """Discretization and sampling controls for the path engine."""

    dt: float
    n_paths: int
    seed: int = 0
    horizon: float | None = None
    scheme: str = "euler-maruyama"
    antithetic: bool = False
    chunk_paths: int = 4096

    def validate(self, params: ModelParams) -> "SimConfig":
        if self.dt <= 0:
            raise ParameterError("dt must be positive")
        if self.dt >= 1.0 / (2.0 * params.k):
            raise ParameterError("dt must be below 1/(2k) for the explicit scheme")
        if self.n_paths <= 0:
            raise ParameterError("n_paths must be positive")
        if self.scheme != "euler-maruyama":
            raise ParameterError(f"unknown scheme {self.scheme!r}")
        if self.horizon is not None and self.horizon <= 0:
            raise ParameterError("horizon must be positive")
        return self

    def resolved_horizon(self, params: ModelParams) -> float:
        """Truncation time with discounted-tail bound below 1e-4."""
        if self.horizon is not None:
            return self.horizon
        p = params
        scale = p.theta * (abs(p.mu) + 5.0 * p.ou_scale) / p.rho
        return math.log(max(scale, 1e-8) / _TAIL_TOL) / p.rho

    def tail_bound(self, params: ModelParams, horizon: float, x_max: float) -> float:
        p = params
        return p.theta * x_max * math.exp(-p.rho * horizon) / p.rho


@dataclass(frozen=True)
class Deviation:
    """A unilateral strategy change of player 1."""

    kind: str           # shift | lump | never
    size: float = 0.0

    @classmethod
    def parse(cls, text: str) -> "Deviation":
        if text == "never":
            return cls("never")
        try:
            kind, size = text.split(":")
            dev = cls(kind, float(size))
        except ValueError as exc:
            raise ParameterError(f"bad deviation spec {text!r}; "
                                 "use shift:<dx>, lump:<dy> or never") from exc
        if dev.kind not in ("shift", "lump"):
            raise ParameterError(f"unknown deviation kind {dev.kind!r}")
        return dev

    def label(self) -> str:
        return self.kind if self.kind == "never" else f"{self.kind}:{self.size:g}"


@dataclass
class SimPath:
    """One discretized trajectory (stored only for small path counts)."""

    times: np.ndarray
    x: np.ndarray
    y1: np.ndarray
    y2: np.ndarray
    i1: np.ndarray
    i2: np.ndarray


@dataclass(frozen=True)
class PayoffEstimate:
    mean: float
    std_error: float
    n: int
    truncation_bias_bound: float


@dataclass
class SimJob:
    """One strategy arm for the batch driver."""

    x0: float
    y0: SimplexPoint
    deviation: Deviation | None = None
    frozen_both: bool = False
    lumps: tuple[float, float] | None = None


@dataclass
class ArmResult:
    """Per-path outputs of one simulated strategy arm."""

    payoff1: np.ndarray
    payoff2: np.ndarray
    y1_final: np.ndarray
    y2_final: np.ndarray
    max_increment: np.ndarray      # largest single-step control increase, t > 0
    max_overshoot: np.ndarray      # largest X_t minus the joint waiting bound
    x_final: np.ndarray
    x_absmax: float
    horizon: float
    dt: float
    y0_post: tuple[float, float]   # state right after the time-0 lumps

    def estimate(self, params: ModelParams, player: int) -> PayoffEstimate:
        arr = self.payoff1 if player == 1 else self.payoff2
        n = arr.size
        bound = params.theta * self.x_absmax * math.exp(-params.rho * self.horizon) / params.rho
        return PayoffEstimate(float(arr.mean()),
                              float(arr.std(ddof=1) / math.sqrt(n)),
                              n, bound)


# ---------------------------------------------------------------------------
# lookup tables
# ---------------------------------------------------------------------------


@dataclass
class StrategyTables:
    fb: np.ndarray          # (nx, nr) float32 strategy-inverse values
    x_lo: float
    hx: float
    r_lo: float
    hr: float
    th_safe: np.ndarray     # (ny, ny) float32 eroded install thresholds
    th: np.ndarray          # (ny, ny) float32 nodal install thresholds
    y_lo: float
    hy: float
    x_hi: float

    @property
    def nx(self):
        return self.fb.shape[0]

    @property
    def nr(self):
        return self.fb.shape[1]


def build_tables(bnd: BoundaryCurve, nx: int = 4096, nr: int = 1024,
                 ny: int = 512, x_margin: float = 0.6) -> StrategyTables:
    """Sample the exact strategy inverse column-by-column into a bilinear table."""
    p = bnd.params
    th = p.theta
    f_foot_min = float(bnd.f1(0.0, 0.0))
    caps = []
    rs = np.linspace(0.0, th, nr)
    # highest price at which any branch still moves: section tops and diag cap
    t_hi_all = np.minimum(rs, th - rs)
    tops = bnd.f_tilde_upper(t_hi_all, np.maximum(rs, t_hi_all))
    x_hi = max(float(bnd.f_diag(0.5 * th)),
               float(np.max(tops - p.beta * (t_hi_all + rs)))) + x_margin
    x_lo = f_foot_min - x_margin
    xg = np.linspace(x_lo, x_hi, nx)

    # shared diagonal inverse sampled once
    sg = np.linspace(0.0, 0.5 * th, 2048)
    fdiag = np.asarray(bnd.f_diag(sg))
    fb = np.empty((nx, nr), dtype=np.float32)
    for j, r in enumerate(rs):
        cap = min(0.5 * th, th - r)
        t_hi = min(r, th - r)
        col = np.zeros(nx)
        if t_hi > 1e-12:
            tg = np.linspace(0.0, t_hi, 2048)
            sec = bnd.f_tilde_upper(tg, np.full_like(tg, r)) - p.beta * (tg + r)
            col = np.interp(xg, sec, tg, left=0.0, right=t_hi)
            f_mid = sec[-1]
        else:
            f_mid = float(bnd.f1(0.0, r)) if r >= 0.5 * th else float(bnd.f_diag(r))
            col = np.where(xg < f_mid, 0.0, 0.0)
        if r <= 0.5 * th:
            dia = np.clip(np.interp(xg, fdiag, sg), r, 0.5 * th)
            col = np.where(xg > f_mid, dia, col)
        col = np.minimum(col, cap)
        top_thresh = bnd.f_diag(0.5 * th) if r <= 0.5 * th else f_mid
        col = np.where(xg > top_thresh, cap, col)
        fb[:, j] = col.astype(np.float32)

    yg = np.linspace(0.0, th, ny)
    yo, ye = np.meshgrid(yg, yg, indexing="ij")
    thr = np.minimum(bnd.threshold_price(yo, ye), _BIG).astype(np.float32)
    safe = thr.copy()
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            shifted = np.roll(np.roll(thr, di, axis=0), dj, axis=1)
            if di == 1:
                shifted[0, :] = _BIG
            if di == -1:
                shifted[-1, :] = _BIG
            if dj == 1:
                shifted[:, 0] = _BIG
            if dj == -1:
                shifted[:, -1] = _BIG
            safe = np.minimum(safe, shifted)
    return StrategyTables(fb, x_lo, xg[1] - xg[0], 0.0, rs[1] - rs[0],
                          safe, thr, 0.0, yg[1] - yg[0], x_hi)


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


@njit(cache=True, fastmath=True)
def _bilinear(tab, x, r, x_lo, inv_hx, nx, r_lo, inv_hr, nr):
    fx = (x - x_lo) * inv_hx
    if fx < 0.0:
        fx = 0.0
    elif fx > nx - 1.000001:
        fx = nx - 1.000001
    fr = (r - r_lo) * inv_hr
    if fr < 0.0:
        fr = 0.0
    elif fr > nr - 1.000001:
        fr = nr - 1.000001
    ix = int(fx)
    ir = int(fr)
    wx = fx - ix
    wr = fr - ir
    return (tab[ix, ir] * (1 - wx) * (1 - wr) + tab[ix + 1, ir] * wx * (1 - wr)
            + tab[ix, ir + 1] * (1 - wx) * wr + tab[ix + 1, ir + 1] * wx * wr)


@njit(cache=True, fastmath=True)
def _floor_lookup(tab, a, b, lo, inv_h, n):
    ia = int((a - lo) * inv_h)
    if ia < 0:
        ia = 0
    elif ia > n - 1:
        ia = n - 1
    ib = int((b - lo) * inv_h)
    if ib < 0:
        ib = 0
    elif ib > n - 1:
        ib = n - 1
    return tab[ia, ib]


@njit(cache=True, fastmath=True)
def _wait_bound(tab, y_own, y_opp, lo, inv_h, n, half_theta, theta):
    """Conservative (ceil-node) install threshold; infinite in the
    saturation component and once capacity is exhausted."""
    if y_own >= half_theta - 1e-12 or y_own + y_opp >= theta - 1e-9:
        return _BIG
    ia = int((y_own - lo) * inv_h) + 1
    if ia > n - 1:
        ia = n - 1
    ib = int((y_opp - lo) * inv_h) + 1
    if ib > n - 1:
        ib = n - 1
    return tab[ia, ib]


@njit(cache=True, fastmath=True)
def _path_chunk(Z, x0, y1_0, y2_0, frozen1, frozen2, shift1,
                k, mu, beta, sig_sqdt, dt, c, theta,
                fb, x_lo, hx, r_lo, hr,
                th_safe, th_tab, y_lo, hy,
                disc, out):
    n_paths, n_steps = Z.shape
    nx, nr = fb.shape
    ny = th_safe.shape[0]
    inv_hx = 1.0 / hx
    inv_hr = 1.0 / hr
    inv_hy = 1.0 / hy
    for pth in range(n_paths):
        x = x0
        y1 = y1_0
        y2 = y2_0
        m1 = y1
        m2 = y2
        flow1 = 0.0
        flow2 = 0.0
        cost1 = 0.0
        cost2 = 0.0
        prev1 = x * y1
        prev2 = x * y2
        max_inc = 0.0
        max_over = -1e300
        x_absmax = abs(x)
        gate = _floor_lookup(th_safe, y1, y2, y_lo, inv_hy, ny)
        gate2 = _floor_lookup(th_safe, y2, y1, y_lo, inv_hy, ny)
        gate_min = gate + shift1 if gate + shift1 < gate2 else gate2
        for s in range(n_steps):
            x += k * (mu - beta * (y1 + y2) - x) * dt + sig_sqdt * Z[pth, s]
            if x > gate_min:
                # at least one player may need to install: exact refresh
                if not frozen1:
                    t1 = _bilinear(fb, x - shift1, y2, x_lo, inv_hx, nx,
                                   r_lo, inv_hr, nr)
                    if t1 > m1:
                        m1 = t1
                if not frozen2:
                    t2 = _bilinear(fb, x, y1, x_lo, inv_hx, nx, r_lo, inv_hr, nr)
                    if t2 > m2:
                        m2 = t2
                ny1 = m1 if m1 > y1 else y1
                ny2 = m2 if m2 > y2 else y2
                if ny1 + ny2 > theta:  # joint cap guard against table dust
                    over = ny1 + ny2 - theta
                    if ny1 - y1 > ny2 - y2:
                        ny1 -= over
                    else:
                        ny2 -= over
                d1 = ny1 - y1
                d2 = ny2 - y2
                if d1 > 0.0 or d2 > 0.0:
                    w = disc[s]
                    cost1 += w * d1
                    cost2 += w * d2
                    if d1 > max_inc:
                        max_inc = d1
                    if d2 > max_inc:
                        max_inc = d2
                    y1 = ny1
                    y2 = ny2
                    gate = _floor_lookup(th_safe, y1, y2, y_lo, inv_hy, ny)
                    gate2 = _floor_lookup(th_safe, y2, y1, y_lo, inv_hy, ny)
                    gate_min = gate + shift1 if gate + shift1 < gate2 else gate2
                # joint waiting-bound violation in price units (conservative)
                b1 = _wait_bound(th_tab, y1, y2, y_lo, inv_hy, ny,
                                 0.5 * theta, theta)
                b2 = _wait_bound(th_tab, y2, y1, y_lo, inv_hy, ny,
                                 0.5 * theta, theta)
                bmin = b1 if b1 < b2 else b2
                if bmin < _BIG and x - bmin > max_over:
                    max_over = x - bmin
            w = disc[s]
            cur1 = x * y1
            cur2 = x * y2
            pw = disc[s - 1] if s > 0 else 1.0
            flow1 += 0.5 * dt * (prev1 * pw + cur1 * w)
            flow2 += 0.5 * dt * (prev2 * pw + cur2 * w)
            prev1 = cur1
            prev2 = cur2
            ax = abs(x)
            if ax > x_absmax:
                x_absmax = ax
        out[pth, 0] = flow1 - c * cost1
        out[pth, 1] = flow2 - c * cost2
        out[pth, 2] = y1
        out[pth, 3] = y2
        out[pth, 4] = max_inc
        out[pth, 5] = max_over
        out[pth, 6] = x
        out[pth, 7] = x_absmax


@njit(cache=True, fastmath=True)
def _frozen_chunk(Z, x0, y1_0, y2_0, k, mu, beta, sig_sqdt, dt, disc, out):
    n_paths, n_steps = Z.shape
    ybar = y1_0 + y2_0
    for pth in range(n_paths):
        x = x0
        flow1 = 0.0
        flow2 = 0.0
        prev1 = x * y1_0
        prev2 = x * y2_0
        x_absmax = abs(x)
        for s in range(n_steps):
            x += k * (mu - beta * ybar - x) * dt + sig_sqdt * Z[pth, s]
            w = disc[s]
            pw = disc[s - 1] if s > 0 else 1.0
            cur1 = x * y1_0
            cur2 = x * y2_0
            flow1 += 0.5 * dt * (prev1 * pw + cur1 * w)
            flow2 += 0.5 * dt * (prev2 * pw + cur2 * w)
            prev1 = cur1
            prev2 = cur2
            ax = abs(x)
            if ax > x_absmax:
                x_absmax = ax
        out[pth, 0] = flow1
        out[pth, 1] = flow2
        out[pth, 2] = y1_0
        out[pth, 3] = y2_0
        out[pth, 4] = 0.0
        out[pth, 5] = -1e300
        out[pth, 6] = x
        out[pth, 7] = x_absmax


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------


class Simulator:
    """Path engine bound to one parameter set and (optionally) a solved boundary."""

    def __init__(self, params: ModelParams, boundary: BoundaryCurve | None,
                 config: SimConfig):
        params.validate()
        config.validate(params)
        self.params = params
        self.boundary = boundary
        self.config = config
        self._tables: StrategyTables | None = None
        self._noise_hook = None   # test hook for coupled-refinement noise

    @property
    def tables(self) -> StrategyTables:
        if self._tables is None:
            if self.boundary is None:
                raise ParameterError("simulator built without a boundary")
            self._tables = build_tables(self.boundary)
        return self._tables

    # -- noise ------------------------------------------------------------

    def _noise(self, scenario: int, chunk: int, n_rows: int, n_steps: int):
        if self._noise_hook is not None:
            return self._noise_hook(scenario, chunk, n_rows, n_steps)
        key = np.array([self.config.seed, (scenario << 32) + chunk], dtype=np.uint64)
        gen = np.random.Generator(np.random.Philox(key=key))
        z = gen.standard_normal((n_rows, n_steps), dtype=np.float32)
        if self.config.antithetic:
            half = n_rows // 2
            z[half:2 * half] = -z[:half]
        return z

    # -- time-0 lumps -------------------------------------------------------

    def initial_state(self, x0: float, y0: SimplexPoint,
                      deviation: Deviation | None):
        """Post-lump capacities and the player-1 boundary shift for the arm."""
        b = self.boundary
        y1, y2 = y0.y1, y0.y2
        shift = 0.0
        if deviation is None:
            t1, t2 = b.initial_push(x0, y1, y2)
        elif deviation.kind == "never":
            t2 = max(float(b.f_bold_inverse(x0, y1)), y2)
            t1 = y1
        elif deviation.kind == "shift":
            shift = deviation.size
            t1 = max(float(b.f_bold_inverse(x0 - shift, y2)), y1)
            t2 = max(float(b.f_bold_inverse(x0, y1)), y2)
        elif deviation.kind == "lump":
            t1, t2 = b.initial_push(x0, y1, y2)
            t1 = min(t1 + deviation.size, self.params.theta - t2)
        else:
            raise ParameterError(f"unknown deviation kind {deviation.kind!r}")
        frozen1 = deviation is not None and deviation.kind == "never"
        return float(t1), float(t2), shift, frozen1

    # -- main entry ---------------------------------------------------------

    def simulate(self, x0: float, y0: SimplexPoint,
                 deviation: Deviation | None = None,
                 scenario: int = 0,
                 frozen_both: bool = False,
                 lumps: tuple[float, float] | None = None) -> ArmResult:
        """Run all paths of one arm and return per-path results.

        ``frozen_both`` freezes both players after optional explicit time-0
        ``lumps`` (used by the calibration checks against the closed forms).
        """
        job = SimJob(x0, y0, deviation=deviation, frozen_both=frozen_both,
                     lumps=lumps)
        return self.batch_simulate([job], scenario=scenario)[0]

    def batch_simulate(self, jobs: list["SimJob"], scenario: int = 0) -> list[ArmResult]:
        """Run many arms against the same noise (one generation per chunk).

        Sharing noise across every arm and start state realizes the
        common-random-number pairing and removes the dominant cost of
        counter-based generation when many arms are compared.
        """
        p = self.params
        cfg = self.config
        horizon = cfg.resolved_horizon(p)
        n_steps = int(math.ceil(horizon / cfg.dt))
        dt = horizon / n_steps
        disc = np.exp(-p.rho * dt * np.arange(1, n_steps + 1))
        sig_sqdt = p.sigma * math.sqrt(dt)

        inits = []
        for job in jobs:
            job.y0.validate(p.theta)
            if job.frozen_both:
                l1, l2 = job.lumps or (0.0, 0.0)
                y1p, y2p = job.y0.y1 + l1, job.y0.y2 + l2
                shift, frozen1 = 0.0, True
                if y1p + y2p > p.theta + EPS_GEOM:
                    raise ParameterError("lumps exceed capacity")
            else:
                y1p, y2p, shift, frozen1 = self.initial_state(
                    job.x0, job.y0, job.deviation)
            inits.append((y1p, y2p, shift, frozen1))

        outs = [np.empty((cfg.n_paths, 8)) for _ in jobs]
        need_tables = any(not job.frozen_both for job in jobs)
        t = self.tables if need_tables else None
        done = 0
        chunk_idx = 0
        while done < cfg.n_paths:
            rows = min(cfg.chunk_paths, cfg.n_paths - done)
            z = self._noise(scenario, chunk_idx, rows, n_steps)
            for job, (y1p, y2p, shift, frozen1), out in zip(jobs, inits, outs):
                block = np.empty((rows, 8))
                if job.frozen_both:
                    _frozen_chunk(z, job.x0, y1p, y2p, p.k, p.mu, p.beta,
                                  sig_sqdt, dt, disc, block)
                else:
                    _path_chunk(z, job.x0, y1p, y2p, frozen1, False, shift,
                                p.k, p.mu, p.beta, sig_sqdt, dt, p.c, p.theta,
                                t.fb, t.x_lo, t.hx, t.r_lo, t.hr,
                                t.th_safe, t.th, t.y_lo, t.hy, disc, block)
                out[done:done + rows] = block
            done += rows
            chunk_idx += 1

        results = []
        for job, (y1p, y2p, shift, frozen1), out in zip(jobs, inits, outs):
            cost0_1 = p.c * (y1p - job.y0.y1)
            cost0_2 = p.c * (y2p - job.y0.y2)
            results.append(ArmResult(
                payoff1=out[:, 0] - cost0_1,
                payoff2=out[:, 1] - cost0_2,
                y1_final=out[:, 2], y2_final=out[:, 3],
                max_increment=out[:, 4], max_overshoot=out[:, 5],
                x_final=out[:, 6], x_absmax=float(out[:, 7].max()),
                horizon=horizon, dt=dt, y0_post=(y1p, y2p)))
        return results

    # -- explicit-path reference (small n, used by tests and the CLI) -------

    def simulate_paths(self, x0: float, y0: SimplexPoint, n_paths: int,
                       deviation: Deviation | None = None,
                       scenario: int = 0) -> list[SimPath]:
        """Pure-numpy mirror of the kernel that records full trajectories."""
        p = self.params
        cfg = self.config
        horizon = cfg.resolved_horizon(p)
        n_steps = int(math.ceil(horizon / cfg.dt))
        dt = horizon / n_steps
        sig_sqdt = p.sigma * math.sqrt(dt)
        y1p, y2p, shift, frozen1 = self.initial_state(x0, y0, deviation)
        t = self.tables
        paths = []
        z_all = self._noise(scenario, 0, min(n_paths, cfg.chunk_paths), n_steps)
        for pth in range(min(n_paths, z_all.shape[0])):
            xs = np.empty(n_steps + 1)
            ys1 = np.empty(n_steps + 1)
            ys2 = np.empty(n_steps + 1)
            xs[0], ys1[0], ys2[0] = x0, y1p, y2p
            x, y1, y2 = x0, y1p, y2p
            m1, m2 = y1, y2
            for s in range(n_steps):
                x += p.k * (p.mu - p.beta * (y1 + y2) - x) * dt \
                    + sig_sqdt * float(z_all[pth, s])
                if not frozen1:
                    m1 = max(m1, _bilinear(t.fb, x - shift, y2, t.x_lo, 1 / t.hx,
                                           t.nx, t.r_lo, 1 / t.hr, t.nr))
                m2 = max(m2, _bilinear(t.fb, x, y1, t.x_lo, 1 / t.hx,
                                       t.nx, t.r_lo, 1 / t.hr, t.nr))
                ny1 = max(y1, m1)
                ny2 = max(y2, m2)
                if ny1 + ny2 > p.theta:
                    over = ny1 + ny2 - p.theta
                    if ny1 - y1 > ny2 - y2:
                        ny1 -= over
                    else:
                        ny2 -= over
                y1, y2 = ny1, ny2
                xs[s + 1], ys1[s + 1], ys2[s + 1] = x, y1, y2
            times = dt * np.arange(n_steps + 1)
            paths.append(SimPath(times, xs, ys1, ys2,
                                 ys1 - y0.y1, ys2 - y0.y2))
        return paths

    def payoff(self, path: SimPath, player: int) -> float:
        """Discounted trapezoidal flow minus discounted installation costs.

        The time-0 lump is charged at weight one; later increments at the
        discount factor of their step end.
        """
        p = self.params
        w = np.exp(-p.rho * path.times)
        y = path.y1 if player == 1 else path.y2
        i = path.i1 if player == 1 else path.i2
        flow = float(np.trapezoid(w * path.x * y, path.times))
        cost = p.c * (i[0] + float(np.sum(w[1:] * np.diff(i))))
        return flow - cost

    # -- reporting ----------------------------------------------------------

    def payoff_estimate(self, x0: float, y0: SimplexPoint, player: int,
                        deviation: Deviation | None = None) -> PayoffEstimate:
        res = self.simulate(x0, y0, deviation=deviation)
        return res.estimate(self.params, player)

    def nash_test(self, x0: float, y0: SimplexPoint, value_field,
                  deviations: list[Deviation], scenario: int = 0,
                  bias_constant: float = 1.0) -> dict:
        """Equilibrium-vs-deviation report with paired differences.

        The equilibrium estimate is also compared against the candidate value
        within 3 standard errors plus ``bias_constant * sqrt(dt)`` for the
        reflected-scheme discretization bias.
        """
        arms = self.batch_simulate(
            [SimJob(x0, y0)] + [SimJob(x0, y0, deviation=d) for d in deviations],
            scenario=scenario)
        eq = arms[0]
        est1 = eq.estimate(self.params, 1)
        est2 = eq.estimate(self.params, 2)
        v1 = float(value_field.value(x0, y0.y1, y0.y2, 1))
        v2 = float(value_field.value(x0, y0.y1, y0.y2, 2))
        tol = 3.0 * est1.std_error + bias_constant * math.sqrt(eq.dt)
        rows = []
        for dev, res in zip(deviations, arms[1:]):
            diff = res.payoff1 - eq.payoff1
            rows.append({
                "deviation": dev.label(),
                "payoff1_mean": float(res.payoff1.mean()),
                "diff_mean": float(diff.mean()),
                "diff_se": float(diff.std(ddof=1) / math.sqrt(diff.size)),
            })
        return {
            "x0": x0, "y0": (y0.y1, y0.y2),
            "equilibrium": {
                "payoff1": est1, "payoff2": est2,
                "value1": v1, "value2": v2,
                "abs_error1": abs(est1.mean - v1),
                "abs_error2": abs(est2.mean - v2),
                "value_tolerance": tol,
            },
            "deviations": rows,
            "max_increment_mean": float(eq.max_increment.mean()),
            "max_overshoot": float(np.max(eq.max_overshoot)),
        }
