"""Smeared two-level detectors in Fermi normal coordinates.

The package builds Fermi normal coordinates along timelike worldlines in a
small catalog of exact spacetimes, compares covariant and non-covariant
interaction Hamiltonians of spatially extended detectors through their
multipole structure, and evaluates first-order excitation probabilities
for a free scalar field in flat spacetime.
"""

__version__ = "0.1.0"

from .detector import *  # noqa: E402,F401,F403
from .errors import (  # noqa: E402,F401
    ChartDomainError,
    FermiChartError,
    FermiDetectorError,
    NumericalError,
    ValidationError,
)
from .fermi import *  # noqa: E402,F401,F403
from .hamiltonians import *  # noqa: E402,F401,F403
from .response import *  # noqa: E402,F401,F403
from .scenario import *  # noqa: E402,F401,F403
from .spacetimes import SPACETIMES, SpacetimeId, curvature_radius, lookup, static_tetrad  # noqa: E402,F401
from .worldline import *  # noqa: E402,F401,F403
