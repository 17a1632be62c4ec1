"""Numerical G2 moduli geometry on the flat 7-torus."""
__version__ = "0.1.0"
