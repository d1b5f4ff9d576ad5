"""Numerical laboratory for the Calabi flow on flat complex tori."""

__version__ = "0.1.0"
