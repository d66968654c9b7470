"""Decoders and Monte-Carlo tools for GKP and toric-GKP codes under Gaussian shift noise."""

from .core import (
    ConfigurationError,
    NoiseParams,
    VillainPotential,
    sample_gaussian_shift,
    villain_derivative,
    villain_value,
    wrap,
)

__all__ = [
    "ConfigurationError",
    "NoiseParams",
    "VillainPotential",
    "sample_gaussian_shift",
    "villain_derivative",
    "villain_value",
    "wrap",
]
