"""
toruscascade - resonant energy cascade on the two-dimensional torus.

This package builds an explicit decaying potential on T^2 whose Schrodinger
flow pushes l^2 mass to ever higher frequencies, simulates the resulting
spectral systems and checks the growth and decay bounds numerically.
"""

__version__ = "0.1.0"
