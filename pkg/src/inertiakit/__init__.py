"""Rigid-body dynamics and online physically consistent inertial estimation."""

__version__ = "0.1.0"
