"""Numerical laboratory for maximal operators on negatively curved spaces."""
__version__ = "0.1.0"
