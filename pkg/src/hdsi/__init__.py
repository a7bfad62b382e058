"""Simultaneous inference for high-dimensional linear regression."""

__version__ = "0.1.0"
