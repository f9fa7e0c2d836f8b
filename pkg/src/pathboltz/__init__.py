"""Feynman path integrals and Boltzmann machines, cross-checked by exact enumeration."""

__version__ = "0.1.0"
