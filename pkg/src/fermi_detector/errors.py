"""Exception hierarchy.

Two families matter to callers: :class:`ValidationError` (bad input, a
precondition was violated) and :class:`NumericalError` (the input was fine
but a numerical method broke down).  The command line tool maps them to
exit codes 2 and 3.
"""


class FermiDetectorError(Exception):
    """Base class for all package errors."""


class ValidationError(FermiDetectorError, ValueError):
    """Input outside the domain of an operation."""


class NumericalError(FermiDetectorError, ArithmeticError):
    """A numerical method failed on otherwise valid input."""


class StepSizeUnderflow(NumericalError):
    """Adaptive ODE step shrank below floating point resolution."""


class NonFiniteError(NumericalError):
    """A state vector or integrand sample became NaN or infinite."""


class SingularMetricError(NumericalError):
    """The metric is not invertible at the requested point."""


class ChartDomainError(ValidationError):
    """A point left the coordinate chart of a metric."""


class TimelikeError(ValidationError):
    """A worldline stopped being timelike."""


class OrthonormalityError(ValidationError):
    """A tetrad failed the orthonormality check."""


class FermiChartError(ValidationError):
    """A Fermi point lies outside the configured validity radius."""
