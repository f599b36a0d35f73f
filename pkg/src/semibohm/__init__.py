"""Semiclassical Bohmian trajectories in a one-dimensional well, with an exact-eigensolver oracle."""

__version__ = "0.1.0"
