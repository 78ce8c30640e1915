"""Exact nilmanifold arithmetic, nilsequences and decompositions of
multiple polynomial correlation sequences."""

__version__ = "0.1.0"
