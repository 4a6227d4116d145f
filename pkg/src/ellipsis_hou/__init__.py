"""Ellipsis resolution by higher-order unification."""

__version__ = "0.1.0"
