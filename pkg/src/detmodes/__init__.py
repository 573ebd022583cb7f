"""Pseudo-spectral Navier-Stokes solver with Littlewood-Paley diagnostics,
determining-wavenumber computation and twin synchronization experiments."""

__version__ = "0.1.0"

from .spectral import TorusGrid, VectorField  # noqa: E402

__all__ = ["TorusGrid", "VectorField", "__version__"]
