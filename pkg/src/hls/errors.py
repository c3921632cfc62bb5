"""Exception hierarchy shared by the library and the CLI."""


class HLSError(Exception):
    """Base class for every error raised by :mod:`hls`."""


class ValidationError(HLSError, ValueError):
    """Input data violates a structural or physical requirement.

    ``details`` maps the name of each violated invariant to a float measuring
    how badly it was violated.
    """

    def __init__(self, message, details=None):
        super().__init__(message)
        self.details = dict(details or {})


class SolverError(HLSError, RuntimeError):
    """A numerical stage failed (overflow, singular system, bad grid)."""


class GridTooCoarseError(SolverError):
    pass


class MarchenkoSingularError(SolverError):
    """The Marchenko operator ``I + G`` is singular at the requested ``x``."""

    def __init__(self, message=None, *, x, smallest_singular_value):
        super().__init__(
            message or f"Marchenko operator singular at x={x:.6g} "
            f"(smallest singular value {smallest_singular_value:.3e})"
        )
        self.x = x
        self.smallest_singular_value = smallest_singular_value


class BoundaryRecoveryError(SolverError):
    def __init__(self, message, nullity=None):
        super().__init__(message)
        self.nullity = nullity
