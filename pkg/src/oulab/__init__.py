"""Numerical laboratory for non-symmetric Ornstein-Uhlenbeck semigroups on domains."""
__version__ = "0.1.0"
