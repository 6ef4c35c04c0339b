"""Extremal Laplace eigenvalues over unions of scaled copies of a generator domain."""

__version__ = "0.1.0"
