"""Invariant maximal nonnegative subspaces of dissipative operators in Krein spaces."""

__version__ = "0.1.0"
