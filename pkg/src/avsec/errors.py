"""Exception types shared across the package.

The CLI maps these onto process exit codes: ``DataError`` -> 3,
``NumericError`` -> 4. Anything else is a bug.
"""


class AvsecError(Exception):
    """Base class for errors raised by this package."""


class DataError(AvsecError):
    """Malformed, inconsistent, or missing input data."""


class NumericError(AvsecError):
    """A numeric computation failed or diverged (NaN loss, degenerate stats)."""


class LeakageError(AvsecError):
    """A train/test contamination guard tripped."""
