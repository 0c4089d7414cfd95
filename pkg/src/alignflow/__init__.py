"""Particle simulation and decay diagnostics for Euler-alignment dynamics with interaction potentials."""

__version__ = "0.1.0"
