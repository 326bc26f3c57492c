"""Simulation of Kuramoto-coupled quasi-cycle oscillator networks."""

__version__ = "0.1.0"
