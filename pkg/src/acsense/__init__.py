"""Metrology with a periodically kicked transverse-field Ising chain."""

from .core import (BlockSpec, DeltaKick, GroundStateOfH0, InvalidParams, ModelParams,
                   PolarizedUp, SquarePulse, ThermalOfH0, kgrid, validate)

__version__ = "0.1.0"

__all__ = [
    "BlockSpec", "DeltaKick", "GroundStateOfH0", "InvalidParams", "ModelParams",
    "PolarizedUp", "SquarePulse", "ThermalOfH0", "kgrid", "validate", "__version__",
]
