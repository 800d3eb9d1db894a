"""Numerical construction and certification of dissipative symmetry-breaking
subsolution data for the incompressible Euler equations on the torus."""

__version__ = "0.1.0"
