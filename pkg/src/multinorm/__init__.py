"""Finite-dimensional laboratory for L-spaces: multinormed structures over a paved base space."""

__version__ = "0.1.0"
