"""Exact and simulated mixing, long-range, speed/entropy and transience computations."""

__version__ = "0.1.0"
