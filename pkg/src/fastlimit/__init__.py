"""Numerical laboratory for fast-reaction limits of reaction-diffusion systems."""

__version__ = "0.1.0"
