"""Signatures of discrete paths, their moment structure and Lasso selection."""

__version__ = "0.1.0"
