"""Sequential inversion of discrete fracture networks from microseismic
event locations, focal mechanisms and pressure observations."""

__version__ = "0.1.0"
