"""Kelvin-Voigt flow laboratory: steady states, spectral constants and decay verification."""

__version__ = "0.1.0"
