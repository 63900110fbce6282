"""Numerics for the fractional critical-growth problem with a sublinear perturbation."""

__version__ = "0.1.0"
