"""Numerical Morrey, BMO and Lipschitz norms, singular integrals and commutators on uniform grids."""

__version__ = "0.1.0"
