"""Numerical certificates for perturbed semigroups on discretized lattices."""

__version__ = "0.1.0"
