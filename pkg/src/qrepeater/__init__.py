"""Simulation of multipath and single-path quantum repeater blocks."""

__version__ = "0.1.0"
