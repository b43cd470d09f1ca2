"""Numerical laboratory for vortex flow lines of the Rabinowitz action on loops in C."""

__version__ = "0.1.0"
