"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: validation failures exit with 1,
numeric failures with 2; audit failures are reported, not raised.
"""


class RecombkinError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(RecombkinError, ValueError):
    """Invalid input: bad shapes, violated invariants, malformed config."""


class PreconditionError(ValidationError):
    """A documented operation precondition does not hold for the given inputs."""


class NumericError(RecombkinError, RuntimeError):
    """Numerical failure: solver breakdown, NaN/Inf, unstable integration."""
