"""Explicit torus FQHE formulas with brute-force numerical cross-checks."""

__version__ = "0.1.0"
