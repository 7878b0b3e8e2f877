"""Exception types shared across the package."""


class GeometryError(Exception):
    """Base class for all geometric/numeric failures."""


class BoundaryError(GeometryError):
    """A finite-difference stencil would leave the coordinate patch."""


class DimensionError(GeometryError):
    """Operation called outside its valid (quaternionic) dimension."""


class DegenerateMetricError(GeometryError):
    """Metric not positive definite enough to work with (min eigenvalue < 1e-8)."""


class DegreeError(GeometryError):
    """Form degree out of range for the requested operation."""


class NotQKTError(GeometryError):
    """The compatibility condition for a torsion connection failed.

    Carries the offending residual so callers (and reports) can show how
    badly the candidate structure misses the existence condition.
    """

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = float(residual)


class ExpressionError(ValueError):
    """Parse or evaluation failure of a user-supplied expression.

    ``offset`` is the byte offset into the source text for parse errors,
    or ``None`` for evaluation-time failures.
    """

    def __init__(self, message: str, offset=None):
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)
        self.offset = offset
