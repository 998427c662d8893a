"""Discrete multivariate normal approximation via Stein's method, with exact
lattice oracles and convergence benchmarks."""

__version__ = "0.1.0"
