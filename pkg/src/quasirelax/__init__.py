"""Gaussian reduced dynamics of two weakly coupled damped quantum oscillators."""

__version__ = "0.1.0"
