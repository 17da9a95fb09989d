"""Vortex equations on flat tori and the exact algebra around them."""

__version__ = "0.1.0"
