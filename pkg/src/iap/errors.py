"""Exception types shared across the package.

The CLI maps these onto process exit codes: validation problems exit 1,
I/O problems (any ``OSError``) exit 2 and numeric failures exit 3.
"""


class IapError(Exception):
    """Base class for package errors."""


class ValidationError(IapError, ValueError):
    """Input violates a documented precondition."""


class NumericError(IapError, ArithmeticError):
    """Non-finite values or a numerically degenerate computation."""
