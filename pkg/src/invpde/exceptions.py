"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Raised when caller-supplied data violates a documented precondition."""


class NumericFailureError(RuntimeError):
    """Raised when a numerical routine cannot produce a finite result."""

    def __init__(self, message, theta=None):
        super().__init__(message)
        self.theta = theta


class UnsupportedOperationError(RuntimeError):
    """Raised when a solver/problem combination is not implemented."""
