"""Simulation and verification tools for superprocesses in a random environment."""
from ._backend import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
