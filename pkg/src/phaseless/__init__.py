"""Imaging point scatterers from intensity-only array data."""

__version__ = "0.1.0"
