"""Simulator for multimode-entangled single-neutron interferometry."""

__version__ = "0.1.0"
