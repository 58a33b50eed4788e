"""Continuous graph processing: operation streams over graph stations."""

__version__ = "0.1.0"
