"""Exception taxonomy. Numerical failures map to CLI exit code 1."""


class PvduopolyError(Exception):
    """Base class for package errors."""


class ParameterError(PvduopolyError, ValueError):
    """Invalid model parameter or malformed parameter file."""


class NumericalError(PvduopolyError):
    """A numerical procedure failed to meet its contract."""


class QuadratureError(NumericalError):
    """Quadrature did not converge to the requested relative tolerance."""


class BracketError(NumericalError):
    """Root finding could not bracket a sign change."""


class OdeSingularityError(NumericalError):
    """Characteristic ODE right-hand side blew up or left the domain."""


class AdmissibilityError(NumericalError):
    """A constructed boundary violates strict monotonicity."""
