"""Numerical tools for critical points of surface diffeomorphisms."""

__version__ = "0.1.0"
