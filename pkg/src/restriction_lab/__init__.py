"""Numerical laboratory for the sphere extension inequality in three dimensions."""

__version__ = "0.1.0"
