"""Numerical laboratory for planar vortices and their three-dimensional lifts."""

__version__ = "0.1.0"
