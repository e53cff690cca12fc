"""Exception hierarchy shared by all modules.

The CLI maps these to process exit codes: ValidationError -> 2,
NumericError -> 3, FormatError -> 4.
"""


class FslError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class ValidationError(FslError):
    """Bad arguments, shapes, or configuration."""

    exit_code = 2


class NumericError(FslError):
    """Overflow or non-finite values where finite integers are required."""

    exit_code = 3


class FormatError(FslError):
    """Malformed or unreadable file contents."""

    exit_code = 4
