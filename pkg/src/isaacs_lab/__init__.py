"""Numerical laboratory for Isaacs equations of stochastic differential games."""

__version__ = "0.1.0"
