"""Identification of single particle and equivalent circuit models of lithium-ion cells."""

__version__ = "0.1.0"
