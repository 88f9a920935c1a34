"""Geometric identity checks for compressible three-dimensional flow.

The package evaluates an acoustical Lorentzian metric and its associated
foliation geometry on exact manufactured flow states, and verifies the
pointwise algebraic identities and localized spacetime integral identities
satisfied by vorticity and entropy-gradient currents, including the
double-null variants.
"""

__version__ = "0.1.0"
