"""Driven square-well Floquet toolkit."""
__version__ = "0.1.0"
