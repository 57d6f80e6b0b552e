"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: UsageError -> 2, DataError -> 3,
NumericError -> 4.
"""


class SvagreeError(Exception):
    """Base class for toolkit errors."""


class UsageError(SvagreeError):
    """Bad command line or configuration."""


class DataError(SvagreeError):
    """Unreadable, malformed, or mismatched input data."""


class NumericError(SvagreeError):
    """Numeric failure: divergence, NaN loss, failed gradient check."""
