"""Numerical checks of exponential decay for semiclassical eigenfunctions
near a caustic, and of its failure mode away from the caustic."""

__version__ = "0.1.0"
