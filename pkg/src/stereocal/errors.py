"""Exception hierarchy shared across the toolkit.

Exit-code mapping used by the CLI: usage errors -> 1, data errors -> 2,
numerical failures -> 3.
"""


class StereocalError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(StereocalError, ValueError):
    """Malformed or out-of-contract input data."""


class DataError(StereocalError):
    """Unreadable, unparsable or inconsistent on-disk data."""


class ParseError(DataError):
    """A file could not be parsed; message carries key/line context."""


class BoardMismatchError(DataError):
    """Left/right board sets violate the equal-count matching assumption."""


class NumericalError(StereocalError):
    """Base for numerical failures."""


class DegenerateFitError(NumericalError):
    """RANSAC or least-squares fit had too few points or no consensus."""


class DegenerateIntersectionError(NumericalError):
    """Line intersection attempted on (near-)parallel lines."""


class ConvergenceError(NumericalError):
    """An iterative solver failed to converge within its budget."""


class OptimizationError(NumericalError):
    """Levenberg-Marquardt failed (singular system, exhausted damping)."""


class RunnerError(StereocalError):
    """External odometry runner failed or produced unparsable output."""
