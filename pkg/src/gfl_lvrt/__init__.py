"""Quasi-static phasor simulation of grid-following converters under LVRT."""
__version__ = "0.1.0"
