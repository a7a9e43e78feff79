"""Moyal star products, Dirac fundamental solutions and external-potential
scattering on periodic lattices."""
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
