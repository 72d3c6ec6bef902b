"""Harvest / Straw bulk-data convergecast simulator."""

__version__ = "0.1.0"
