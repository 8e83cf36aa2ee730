"""Realization of radial normal forms by scalar delay-differential equations."""

__version__ = "0.1.0"
