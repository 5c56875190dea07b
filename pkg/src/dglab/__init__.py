"""Numerical laboratory for weighted degenerate and forward-backward parabolic equations."""

__version__ = "0.1.0"
