"""Nonlocal-in-time diffusion with a finite memory horizon."""

__version__ = "0.1.0"
