"""Adaptive virtual element solver for Darcy flow on discrete fracture networks."""

__version__ = "0.1.0"
