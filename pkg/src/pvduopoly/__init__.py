"""Two-producer irreversible-investment game under a mean-reverting power price.

The package solves the one-shot (static) Nash equilibrium in closed form,
constructs the free boundaries and candidate value functions of the
continuous-time game, and verifies the equilibrium property by Monte Carlo
simulation of the reflected installation strategy.
"""

__version__ = "0.1.0"

from .params import ModelParams, SimplexPoint, reflect
from .psi import PsiEvaluator

__all__ = ["ModelParams", "SimplexPoint", "reflect", "PsiEvaluator", "__version__"]
