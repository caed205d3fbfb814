"""Market parameters and the simplex geometry shared by all solvers."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

import numpy as np

from .errors import ParameterError

# Absolute tolerance on y1 + y2 <= theta. Reflected strategies push states
# exactly onto simplex faces, so membership tests must absorb float drift.
EPS_GEOM = 1e-12

_PARAM_KEYS = ("k", "mu", "sigma", "beta", "rho", "c", "theta")


@dataclass(frozen=True)
class ModelParams:
    """The seven market constants.

    k      mean-reversion speed (1/time)
    mu     long-term price mean (price)
    sigma  price volatility (price/sqrt(time))
    beta   price-impact coefficient (price per unit power)
    rho    discount rate (1/time)
    c      unit installation cost (price per unit power)
    theta  total capacity cap (power units)
    """

    k: float
    mu: float
    sigma: float
    beta: float
    rho: float
    c: float
    theta: float

    def validate(self) -> "ModelParams":
        for name in ("k", "sigma", "beta", "rho", "theta"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v)):
                raise ParameterError(f"{name} must be a finite number")
            if v <= 0:
                raise ParameterError(f"{name} must be positive")
        if not (isinstance(self.mu, (int, float)) and math.isfinite(self.mu)):
            raise ParameterError("mu must be a finite number")
        if not (isinstance(self.c, (int, float)) and math.isfinite(self.c)):
            raise ParameterError("c must be a finite number")
        if self.c < 0:
            raise ParameterError("c must be nonnegative")
        return self

    # -- derived constants used throughout ------------------------------

    @property
    def nu(self) -> float:
        """Exponent rho/k of the fundamental-solution integral."""
        return self.rho / self.k

    @property
    def ou_scale(self) -> float:
        """Stationary standard deviation sigma/sqrt(2k) of the uncontrolled price."""
        return self.sigma / math.sqrt(2.0 * self.k)

    @property
    def corner_c(self) -> "SimplexPoint":
        return SimplexPoint(self.theta / 2.0, self.theta / 2.0)

    # -- JSON parameter file --------------------------------------------

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        if not isinstance(d, dict):
            raise ParameterError("parameter file must contain a JSON object")
        missing = [key for key in _PARAM_KEYS if key not in d]
        if missing:
            raise ParameterError(f"missing parameter keys: {', '.join(missing)}")
        unknown = [key for key in d if key not in _PARAM_KEYS]
        if unknown:
            raise ParameterError(f"unknown parameter keys: {', '.join(unknown)}")
        vals = {}
        for key in _PARAM_KEYS:
            v = d[key]
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ParameterError(f"parameter {key} must be a number")
            vals[key] = float(v)
        return cls(**vals).validate()

    @classmethod
    def from_json(cls, path: str) -> "ModelParams":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ParameterError(f"cannot read parameter file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ParameterError(f"invalid JSON in {path}: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)

    def describe(self) -> str:
        return " ".join(f"{key}={getattr(self, key):.12g}" for key in _PARAM_KEYS)


@dataclass(frozen=True)
class SimplexPoint:
    """Installed power pair (y1, y2) in the closed simplex of size theta."""

    y1: float
    y2: float

    def validate(self, theta: float) -> "SimplexPoint":
        if self.y1 < -EPS_GEOM or self.y2 < -EPS_GEOM:
            raise ParameterError("installed power must be nonnegative")
        if self.y1 + self.y2 > theta + EPS_GEOM:
            raise ParameterError(f"y1 + y2 = {self.y1 + self.y2} exceeds theta = {theta}")
        return self

    @property
    def total(self) -> float:
        return self.y1 + self.y2

    def as_tuple(self) -> tuple[float, float]:
        return (self.y1, self.y2)


def reflect(p: SimplexPoint) -> SimplexPoint:
    """Coordinate swap (y1, y2) -> (y2, y1); an involution on the simplex."""
    return SimplexPoint(p.y2, p.y1)


def in_simplex(y1, y2, theta: float, eps: float = EPS_GEOM):
    """Vectorized closed-simplex membership with the geometric tolerance."""
    y1 = np.asarray(y1)
    y2 = np.asarray(y2)
    return (y1 >= -eps) & (y2 >= -eps) & (y1 + y2 <= theta + eps)
