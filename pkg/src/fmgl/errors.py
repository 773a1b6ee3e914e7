"""Exception hierarchy shared across the package.

The three leaf classes map onto the CLI exit codes: parameter errors
exit 1, data errors exit 2, numerical failures exit 3.
"""


class FmglError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(FmglError):
    """Invalid parameter value or structurally inconsistent inputs."""


class DataError(FmglError):
    """Unusable input data (non-finite entries, unreadable files, ...)."""


class NumericalError(FmglError):
    """Numerical breakdown: failed factorization, line-search failure,
    non-finite objective, or an inconsistent subproblem solution."""
