"""Exception hierarchy shared across the package.

All numerical failures raise subclasses of :class:`GmdkitError` so that
callers (notably the CLI) can distinguish usage errors from numerical
ones with a single ``except`` clause.
"""


class GmdkitError(Exception):
    """Base class for all package-specific errors."""


class KernelError(GmdkitError):
    """A supplied kernel matrix is not symmetric positive definite."""


class DimensionError(GmdkitError):
    """Shapes of the supplied matrices/vectors do not conform."""


class DegenerateInputError(GmdkitError):
    """An input is degenerate (zero column, zero response, ...)."""


class ConvergenceError(GmdkitError):
    """An iterative solver failed to converge within its budget."""
