"""Steady states and lineshapes of a driven, dissipative Fano model."""

from .model import ModelParams, PhysicalParams, dimensionless_from_physical, epsilon_of, validate

__all__ = ["ModelParams", "PhysicalParams", "dimensionless_from_physical", "epsilon_of", "validate"]
__version__ = "0.1.0"
