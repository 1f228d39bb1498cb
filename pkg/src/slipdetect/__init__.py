"""Slip detection from optical tactile pin fields."""

__version__ = "0.1.0"
