"""Exception types shared across the package."""


class DkrrError(Exception):
    """Base class for all package errors."""


class InvalidInputError(DkrrError, ValueError):
    """Arguments violate a documented precondition."""


class NumericalFailureError(DkrrError, RuntimeError):
    """A linear solve could not be completed, even after diagonal jitter."""

    def __init__(self, message: str, size: int | None = None, lam: float | None = None):
        super().__init__(message)
        self.size = size
        self.lam = lam


class InvalidStateError(DkrrError, RuntimeError):
    """An object was used in a way its recorded state does not allow."""


class ConfigurationError(DkrrError, ValueError):
    """An experiment configuration is malformed or infeasible."""
