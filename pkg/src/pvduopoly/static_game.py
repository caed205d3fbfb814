"""Closed-form one-shot installation game: both players act only at t=0.

All operations accept scalars or numpy arrays (broadcast together) and are
exact formulas; the only iteration anywhere is in test oracles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .params import EPS_GEOM, ModelParams, SimplexPoint

REGION_LABELS = ("WW", "IW", "WI", "II")


@dataclass(frozen=True)
class StaticState:
    x: float
    y: SimplexPoint


@dataclass(frozen=True)
class StaticInstallation:
    i1: float
    i2: float


@dataclass(frozen=True)
class StaticRegion:
    label: str            # player-1 status then player-2 status, W or I
    saturating: bool      # equilibrium drives total capacity to theta


def a_of_x(params: ModelParams, x):
    """Affine price index A(x) = (x rho + mu k - c rho (rho+k)) / (2 beta k)."""
    p = params
    return (np.asarray(x, dtype=float) * p.rho + p.mu * p.k
            - p.c * p.rho * (p.rho + p.k)) / (2.0 * p.beta * p.k)


def a_inverse(params: ModelParams, a):
    p = params
    return (2.0 * p.beta * p.k * np.asarray(a, dtype=float)
            - p.mu * p.k + p.c * p.rho * (p.rho + p.k)) / p.rho


def static_payoff(params: ModelParams, x, y1, y2, i1, i2, player: int):
    """Exact expected profit of `player` for a time-0 lump installation.

    Inadmissible installations (negative, or total beyond theta) raise.
    """
    x, y1, y2, i1, i2 = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (x, y1, y2, i1, i2)))
    if np.any(i1 < -EPS_GEOM) or np.any(i2 < -EPS_GEOM):
        raise ParameterError("installations must be nonnegative")
    total = y1 + i1 + y2 + i2
    if np.any(total > params.theta + 1e-9):
        raise ParameterError("installation exceeds capacity cap theta")
    p = params
    own = (y1 + i1, y2 + i2)[player - 1]
    inst = (i1, i2)[player - 1]
    price_term = x * p.rho + p.mu * p.k - p.beta * p.k * total
    val = own * price_term / (p.rho * (p.rho + p.k)) - p.c * inst
    return val if val.ndim else float(val)


def best_response(params: ModelParams, x, y1, y2, opp_install, player: int):
    """min{theta - Y_j - y_i, A(x) - Y_j/2 - y_i} clipped at zero.

    Y_j is the opponent's post-installation level y_j + opp_install.
    """
    x, y1, y2, opp = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (x, y1, y2, opp_install)))
    a = a_of_x(params, x)
    y_own = (y1, y2)[player - 1]
    y_opp = (y2, y1)[player - 1] + opp
    br = np.minimum(params.theta - y_opp - y_own, a - 0.5 * y_opp - y_own)
    br = np.maximum(br, 0.0)
    return br if br.ndim else float(br)


def static_equilibrium(params: ModelParams, x, y1, y2):
    """Equilibrium installations (i1, i2).

    Below the saturation threshold the equilibrium is unique (interior
    intersection of best responses, or a one-sided response with capacity
    clipping). Above it any capacity-saturating selection is an equilibrium;
    the canonical output never installs a player beyond theta/2, matching the
    convention used by the continuous game's saturation waiting set.
    """
    x, y1, y2 = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (x, y1, y2)))
    scalar = x.ndim == 0
    shape = x.shape
    x, y1, y2 = (np.atleast_1d(v).ravel() for v in (x, y1, y2))
    p = params
    a = a_of_x(p, x)
    i1 = np.zeros_like(a)
    i2 = np.zeros_like(a)

    poor1 = y1 < (2.0 / 3.0) * a
    poor2 = y2 < (2.0 / 3.0) * a

    # one-sided response: the richer player stays put
    one1 = poor1 & ~poor2
    one2 = poor2 & ~poor1
    br1 = np.clip(np.minimum(p.theta - y2 - y1, a - 0.5 * y2 - y1), 0.0, None)
    br2 = np.clip(np.minimum(p.theta - y1 - y2, a - 0.5 * y1 - y2), 0.0, None)
    i1[one1] = br1[one1]
    i2[one2] = br2[one2]

    # joint interior installation (no saturation for A <= 3 theta / 4)
    both = poor1 & poor2
    interior = both & (a <= 0.75 * p.theta)
    i1[interior] = ((2.0 / 3.0) * a - y1)[interior]
    i2[interior] = ((2.0 / 3.0) * a - y2)[interior]

    # joint saturation: fill capacity, never pushing a player above theta/2
    sat = both & (a > 0.75 * p.theta)
    rich1 = sat & (y1 >= 0.5 * p.theta)
    rich2 = sat & (y2 >= 0.5 * p.theta) & ~rich1
    split = sat & ~rich1 & ~rich2
    i2[rich1] = (p.theta - y1 - y2)[rich1]
    i1[rich2] = (p.theta - y1 - y2)[rich2]
    i1[split] = (0.5 * p.theta - y1)[split]
    i2[split] = (0.5 * p.theta - y2)[split]

    if scalar:
        return float(i1[0]), float(i2[0])
    return i1.reshape(shape), i2.reshape(shape)


def nash_certificate(params: ModelParams, x, y1, y2, i1, i2,
                     step: float | None = None, tol: float = 1e-9):
    """Check the one-shot equilibrium inequality on a deviation grid.

    For each player, every admissible deviation level Y'_i in [y_i, theta-Y_j]
    (grid step theta/1000 by default) must satisfy
    (Y'_i - Y_i)(2A - Y_j - Y'_i - Y_i) <= tol.
    """
    x, y1, y2, i1, i2 = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (x, y1, y2, i1, i2)))
    if step is None:
        step = params.theta / 1000.0
    a = a_of_x(params, x)
    n_dev = int(np.ceil(params.theta / step)) + 1
    frac = np.linspace(0.0, 1.0, n_dev)
    ok = np.ones(a.shape, dtype=bool)
    for own_y, opp_y, own_i, opp_i in ((y1, y2, i1, i2), (y2, y1, i2, i1)):
        y_cap = own_y + own_i
        y_opp = opp_y + opp_i
        hi = np.maximum(params.theta - y_opp, own_y)
        # grid spans [own_y, hi] with at most `step` spacing
        dev = own_y[..., None] + (hi - own_y)[..., None] * frac
        lhs = (dev - y_cap[..., None]) * (
            2.0 * a[..., None] - y_opp[..., None] - dev - y_cap[..., None])
        ok &= np.max(lhs, axis=-1) <= tol
    return ok if ok.ndim else bool(ok)


def static_boundary_F(params: ModelParams, player: int, y1, y2):
    """One-shot free boundary F_i(y) = A^{-1}(y_i + y_j/2) on {y_i <= y_j}."""
    y1 = np.asarray(y1, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    own, opp = ((y1, y2) if player == 1 else (y2, y1))
    if np.any(own > opp + EPS_GEOM):
        raise ParameterError(
            f"static_boundary_F for player {player} requires y_{player} <= y_opponent")
    val = a_inverse(params, own + 0.5 * opp)
    return val if val.ndim else float(val)


def _in_wait(params: ModelParams, player: int, x, y1, y2):
    """Membership of one player's waiting set (free, prolongation, saturation)."""
    own, opp = ((y1, y2) if player == 1 else (y2, y1))
    free = (own <= opp) & (x < a_inverse(params, own + 0.5 * opp))
    prol = (own > opp) & (own <= 0.5 * params.theta) & \
        (x < a_inverse(params, 1.5 * own))
    sat = (own > opp) & (own > 0.5 * params.theta)
    return free | prol | sat


def static_region(params: ModelParams, x, y1, y2):
    """Classify states into WW/IW/WI/II; the letters are player 1 then player 2."""
    x, y1, y2 = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (x, y1, y2)))
    w1 = _in_wait(params, 1, x, y1, y2)
    w2 = _in_wait(params, 2, x, y1, y2)
    code = (~w1).astype(int) * 1 + (~w2).astype(int) * 2  # WW=0 IW=1 WI=2 II=3
    i1, i2 = static_equilibrium(params, x, y1, y2)
    saturating = (y1 + y2 + np.atleast_1d(i1) + np.atleast_1d(i2)
                  >= params.theta - EPS_GEOM)
    if code.ndim:
        return code, saturating
    return StaticRegion(REGION_LABELS[int(code)], bool(saturating))


def _inv_f_joint(params: ModelParams, x):
    """Joint boundary inverse: both players' common target level, capped at theta/2."""
    a = a_of_x(params, x)
    return np.clip((2.0 / 3.0) * a, 0.0, 0.5 * params.theta)


def _inv_f_sectional(params: ModelParams, x, y_opp):
    """Single-player boundary inverse at fixed opponent level, capped at theta - y_opp."""
    a = a_of_x(params, x)
    return np.clip(a - 0.5 * y_opp, 0.0, params.theta - y_opp)


def static_value(params: ModelParams, x, y1, y2, player: int):
    """Equilibrium value: the four-case table over WW/IW/WI/II."""
    x, y1, y2 = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (x, y1, y2)))
    w1 = _in_wait(params, 1, x, y1, y2)
    w2 = _in_wait(params, 2, x, y1, y2)
    own, opp = ((y1, y2) if player == 1 else (y2, y1))
    w_own, w_opp = ((w1, w2) if player == 1 else (w2, w1))

    joint = _inv_f_joint(params, x)
    tgt_own_sec = _inv_f_sectional(params, x, opp)    # own push, opponent fixed
    tgt_opp_sec = _inv_f_sectional(params, x, own)    # opponent push, own fixed

    yo = np.where(w_own, own, np.where(w_opp, tgt_own_sec, joint))
    yp = np.where(w_opp, opp, np.where(w_own, tgt_opp_sec, joint))
    cost = params.c * np.where(w_own, 0.0, yo - own)
    val = _r_formula(params, x, yo, yo + yp) - cost
    return val if val.ndim else float(val)


def _r_formula(params: ModelParams, x, y_own, total):
    p = params
    return y_own * (x * p.rho + p.mu * p.k - p.beta * p.k * total) / (p.rho * (p.rho + p.k))


def pareto_install(params: ModelParams, x, ybar):
    """Aggregate installation of the social planner: min{A(x)-ybar, theta-ybar} or 0."""
    x = np.asarray(x, dtype=float)
    ybar = np.asarray(ybar, dtype=float)
    a = a_of_x(params, x)
    val = np.clip(np.minimum(a - ybar, params.theta - ybar), 0.0, None)
    return val if val.ndim else float(val)


# -- scalar wrappers over the dataclass types ---------------------------

def equilibrium_at(params: ModelParams, state: StaticState) -> StaticInstallation:
    i1, i2 = static_equilibrium(params, state.x, state.y.y1, state.y.y2)
    return StaticInstallation(i1, i2)


def region_at(params: ModelParams, state: StaticState) -> StaticRegion:
    return static_region(params, state.x, state.y.y1, state.y.y2)


def value_at(params: ModelParams, state: StaticState, player: int) -> float:
    return static_value(params, state.x, state.y.y1, state.y.y2, player)
