"""Exception hierarchy.

Every error raised by the toolkit derives from :class:`FraoError`. The CLI
maps the three top-level families onto exit codes (validation 2, numerical 3,
model evaluation 4).
"""


class FraoError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class ValidationError(FraoError, ValueError):
    """Bad input: out-of-domain parameters, malformed config, bad bounds."""

    exit_code = 2


class DomainError(ValidationError):
    """Parameter point outside the open parameter domain of its family."""


class InvalidTruncationError(ValidationError):
    """Truncation interval with a >= b, non-finite ends, or outside the support."""


class RadiusTooLargeError(ValidationError):
    """Sphere radius pushes a closed-form sphere point out of the domain."""


class NotAvailableError(ValidationError):
    """Operation not provided for this family kind (e.g. no closed form)."""


class NumericalError(FraoError, ArithmeticError):
    """A numerical routine failed or produced an unusable result."""

    exit_code = 3

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class QuadratureError(NumericalError):
    """Quadrature did not converge."""


class DegenerateTruncationError(NumericalError):
    """The truncation interval carries (numerically) no probability mass."""


class BoundaryError(NumericalError):
    """Finite-difference stencil leaves the parameter domain."""


class BlowUpError(NumericalError):
    """Geodesic left the domain before t = 1; carries the partial trajectory."""

    def __init__(self, message, geodesic=None, **diagnostics):
        super().__init__(message, **diagnostics)
        self.geodesic = geodesic


class SphereDegenerateError(NumericalError):
    """No geodesic of a sphere discretization reached t = 1."""


class NoConvergenceError(NumericalError):
    """Iterative solver exhausted its iteration budget."""


class DegenerateWeightsError(NumericalError):
    """All importance weights vanished."""


class ZeroQoIError(NumericalError):
    """The baseline quantity of interest is zero, so the PLI is undefined."""


class ModelEvaluationError(FraoError):
    """The forward model returned a non-finite value."""

    exit_code = 4

    def __init__(self, message, draw=None):
        super().__init__(message)
        self.draw = draw
