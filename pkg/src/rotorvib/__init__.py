"""Rotor blade defect detection from dual-sensor vibration recordings."""

__version__ = "0.1.0"
