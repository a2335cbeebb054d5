"""Rank bounds for y^2 = x(x - p)(x - 2) and other curves with full rational 2-torsion."""

__version__ = "0.1.0"
