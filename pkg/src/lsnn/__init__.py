"""Least-squares ReLU network solver for linear advection-reaction problems."""

__version__ = "0.1.0"
