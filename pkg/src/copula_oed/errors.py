"""Exception types shared across the package."""


class CopulaOedError(Exception):
    """Base class for all package errors."""


class NumericalError(CopulaOedError):
    """A numerical routine hit a non-finite value or failed to converge."""


class BracketError(CopulaOedError):
    """Root bracketing failed: no sign change over the given interval."""


class SingularMatrixError(CopulaOedError):
    """A matrix required to be positive definite was not.

    Carries the index of the failing Cholesky pivot when available.
    """

    def __init__(self, message, pivot_index=None):
        super().__init__(message)
        self.pivot_index = pivot_index


class DomainError(CopulaOedError):
    """An argument fell outside the mathematically valid domain."""


class ModelError(CopulaOedError):
    """An outcome model produced an invalid probability or moment."""


class ConfigError(CopulaOedError):
    """A run configuration is syntactically or semantically invalid."""
