"""Matrix-weighted dyadic harmonic analysis laboratory."""

__version__ = "0.1.0"
