"""Convolution-enriched finite element solver for hyperelastic solid dynamics."""

__version__ = "0.1.0"
