"""Fundamental solution of the discounted OU generator equation.

The increasing positive solution of

    (sigma^2/2) u'' + k (mu - x) u' - rho u = 0

is represented as the Laplace-type integral

    psi(x) = (1/Gamma(rho/k)) * int_0^inf t^(rho/k - 1)
             * exp(-t^2/2 + z t) dt,      z = (x - mu) sqrt(2k) / sigma,

and every x-derivative multiplies the integrand by t*sqrt(2k)/sigma.
Quadrature is the single source of truth here: values are produced by a
fixed exp-sinh (double-exponential) rule shared across evaluation points,
calibrated at construction by node doubling until two successive rules
agree to a target relative tolerance. The integrand is evaluated in log
space and exponentiated once after subtracting the row peak, so large
arguments do not overflow intermediate terms.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import QuadratureError
from .params import ModelParams

_CHUNK = 4096  # rows per evaluation block, bounds the (rows x nodes) matrix


class PsiEvaluator:
    """Evaluates psi and its first three derivatives plus the Wronskian combos.

    Immutable after construction; safe to share between threads. The node
    doubling at construction both calibrates the rule and stores the achieved
    relative-error estimate in ``rel_err_estimate``.
    """

    def __init__(self, params: ModelParams, rel_tol: float = 1e-10,
                 x_range: tuple[float, float] | None = None,
                 n_start: int = 100, n_max: int = 6400):
        params.validate()
        self.params = params
        self.rel_tol = rel_tol
        self._s2k = math.sqrt(2.0 * params.k) / params.sigma
        self._nu = params.nu
        self._inv_gamma = 1.0 / math.gamma(self._nu)

        if x_range is None:
            s = params.ou_scale
            x_range = (params.mu - 12.0 * s, params.mu + 12.0 * s)
        self.x_range = x_range

        # Left tail must resolve the integrable t^(nu-1) endpoint for small nu.
        u_max = max(4.0, math.asinh(80.0 / (math.pi * self._nu)))
        self._u_max = u_max

        probe = np.linspace(x_range[0], x_range[1], 33)
        n = n_start
        prev = self._raw_eval(probe, *self._build_rule(n))
        while True:
            n *= 2
            rule = self._build_rule(n)
            cur = self._raw_eval(probe, *rule)
            scale = np.maximum(np.abs(cur), 1e-300)
            rel = np.max(np.abs(cur - prev) / scale)
            if rel <= rel_tol:
                break
            if n >= n_max:
                raise QuadratureError(
                    f"psi quadrature did not converge: rel error {rel:.3e} "
                    f"> {rel_tol:.1e} at {2 * n + 1} nodes")
            prev = cur
        self.rel_err_estimate = float(rel)
        self.n_side = n
        t, log_jac = rule
        self._t = t
        self._log_jac = log_jac
        # order-j sums reuse one exp matrix with reweighted columns
        self._pow = np.stack([(t * self._s2k) ** j for j in range(4)])
        for arr in (self._t, self._log_jac, self._pow):
            arr.setflags(write=False)

    # -- rule construction and raw evaluation ---------------------------

    def _build_rule(self, n_side: int):
        u = np.linspace(-self._u_max, self._u_max, 2 * n_side + 1)
        h = u[1] - u[0]
        su = 0.5 * math.pi * np.sinh(u)
        t = np.exp(su)
        log_jac = np.log(0.5 * math.pi * np.cosh(u)) + su + math.log(h)
        return t, log_jac

    def _raw_eval(self, x, t, log_jac):
        """psi (order 0) only, used during calibration."""
        z = (np.asarray(x, dtype=float) - self.params.mu) * self._s2k
        logv = ((self._nu - 1.0) * np.log(t) - 0.5 * t * t + log_jac
                + np.outer(z, t))
        m = logv.max(axis=1, keepdims=True)
        return np.exp(m[:, 0]) * np.exp(logv - m).sum(axis=1) * self._inv_gamma

    # -- public evaluation ----------------------------------------------

    def psi_all(self, x, check: bool = False):
        """Return array of shape (4, ...) holding psi, psi', psi'', psi'''.

        With ``check=True`` an embedded coarse rule (every other node) is
        compared against the full rule; disagreement beyond tolerance raises
        QuadratureError instead of returning a silently wrong value.
        """
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        flat = np.atleast_1d(x).ravel()
        out = np.empty((4, flat.size))
        err = 0.0
        t, log_jac = self._t, self._log_jac
        base = (self._nu - 1.0) * np.log(t) - 0.5 * t * t + log_jac
        for lo in range(0, flat.size, _CHUNK):
            sl = slice(lo, min(lo + _CHUNK, flat.size))
            z = (flat[sl] - self.params.mu) * self._s2k
            logv = base + np.outer(z, t)
            m = logv.max(axis=1, keepdims=True)
            ex = np.exp(logv - m)
            sums = ex @ self._pow.T          # (rows, 4)
            out[:, sl] = (np.exp(m) * self._inv_gamma * sums).T
            if check:
                coarse = 2.0 * (ex[:, ::2] @ self._pow[:, ::2].T)
                rel = np.abs(coarse - sums) / np.maximum(np.abs(sums), 1e-300)
                err = max(err, float(rel.max()))
        if check and err > 100.0 * self.rel_tol:
            raise QuadratureError(
                f"psi evaluation self-check failed: rel error {err:.3e}")
        if scalar:
            return out[:, 0]
        return out.reshape((4,) + np.atleast_1d(x).shape)

    def psi(self, x, order: int = 0, check: bool = False):
        if order not in (0, 1, 2, 3):
            raise ValueError("order must be in 0..3")
        return self.psi_all(x, check=check)[order]

    def estimate_error(self, x) -> float:
        """Relative difference between the full rule and its embedded half rule."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        z = (x - self.params.mu) * self._s2k
        t, log_jac = self._t, self._log_jac
        logv = ((self._nu - 1.0) * np.log(t) - 0.5 * t * t + log_jac
                + np.outer(z, t))
        m = logv.max(axis=1, keepdims=True)
        ex = np.exp(logv - m)
        fine = ex.sum(axis=1)
        coarse = 2.0 * ex[:, ::2].sum(axis=1)
        return float(np.max(np.abs(coarse - fine) / np.maximum(fine, 1e-300)))

    # -- Wronskian-like combinations and the defining ODE ----------------

    def q0(self, x):
        """psi * psi'' - psi'^2; strictly positive for all real x."""
        p = self.psi_all(x)
        val = p[0] * p[2] - p[1] * p[1]
        self._require_positive(val, x, "Q0")
        return val

    def q1(self, x):
        """psi' * psi''' - psi''^2; strictly positive for all real x."""
        p = self.psi_all(x)
        val = p[1] * p[3] - p[2] * p[2]
        self._require_positive(val, x, "Q1")
        return val

    @staticmethod
    def _require_positive(val, x, name):
        arr = np.atleast_1d(val)
        if np.any(arr <= 0.0):
            bad = np.atleast_1d(x)[np.argmin(arr)]
            raise QuadratureError(
                f"{name} non-positive at x = {bad}: quadrature failure")

    def ode_residual(self, x):
        """(sigma^2/2) psi'' + k (mu - x) psi' - rho psi; zero up to quadrature."""
        p = self.psi_all(x)
        pr = self.params
        x = np.asarray(x, dtype=float)
        return 0.5 * pr.sigma ** 2 * p[2] + pr.k * (pr.mu - x) * p[1] - pr.rho * p[0]
