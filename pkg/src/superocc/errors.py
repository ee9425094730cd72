"""Exception types shared across the package."""
from __future__ import annotations


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class QuadratureError(ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message: str, achieved: float | None = None):
        super().__init__(message if achieved is None else f"{message} (achieved error {achieved:.3g})")
        self.achieved = achieved


class FactorizationError(ArithmeticError):
    """Covariance matrix could not be factorized within the jitter budget."""


class PopulationCapError(RuntimeError):
    """Particle population exceeded the configured cap."""


class UnsupportedFunctionError(TypeError):
    """Test function kind not supported by the requested operation."""


class ResolutionError(ValueError):
    """Lattice too coarse for the requested bandwidth or time step."""


class InsufficientDataError(ValueError):
    """Not enough (non-degenerate) data for a regression."""


class ConfigError(ValueError):
    """Invalid experiment configuration; ``path`` names the offending field."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
