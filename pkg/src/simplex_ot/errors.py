"""Exception hierarchy.

Every error raised on purpose by the library derives from :class:`SimplexOTError`
so callers (and the CLI) can distinguish computation failures from bugs.
"""

from __future__ import annotations


class SimplexOTError(Exception):
    """Base class for all library errors."""


class GraphError(SimplexOTError):
    """Invalid graph document or graph structure."""

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        if location is not None:
            message = f"{message} (at {location})"
        super().__init__(message)


class GraphParseError(GraphError):
    pass


class DisconnectedGraphError(GraphError):
    pass


class NonPositiveWeightError(GraphError):
    pass


class DuplicateEdgeError(GraphError):
    pass


class SelfLoopError(GraphError):
    pass


class DensityError(SimplexOTError):
    """A vertex vector that is not an admissible interior density."""


class BoundaryError(DensityError):
    """Density on (or numerically too close to) the boundary of the simplex."""

    def __init__(self, message: str, min_value: float | None = None, index: int | None = None):
        self.min_value = min_value
        self.index = index
        super().__init__(message)


class SpectralError(SimplexOTError):
    """Kernel of L(rho) is not one-dimensional."""


class ConvergenceError(SimplexOTError):
    """An iterative solver did not reach its tolerance."""

    def __init__(self, message: str, residual: float | None = None):
        self.residual = residual
        super().__init__(message)


class BoundaryExitError(SimplexOTError):
    """A trajectory left the interior of the simplex."""

    def __init__(self, message: str, time: float | None = None):
        self.time = time
        super().__init__(message)
