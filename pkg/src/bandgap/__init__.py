"""Floquet spectral bands and gaps of periodic warped and conformal manifolds."""

__version__ = "0.1.0"
