"""Variance-reduced policy gradient laboratory."""

__version__ = "0.1.0"
