"""Potts interfaces above a wall: samplers, decompositions, effective walks."""

__version__ = "0.1.0"
