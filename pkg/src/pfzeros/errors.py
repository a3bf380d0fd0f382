"""Exception types shared across the package."""


class PfzError(Exception):
    """Base class for package-specific failures."""


class CapExceededError(PfzError):
    """A size/memory cap (spin count, qubit count, matrix dimension) was exceeded."""


class IllConditionedError(PfzError):
    """A ratio or correlation was requested too close to a partition-function zero."""


class ConvergenceError(PfzError):
    """An iterative solver (Newton, Aberth) failed to converge."""
