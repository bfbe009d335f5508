"""Tangent-point knot energies on sampled closed curves."""

from .curve_core import Curve, EnergyParams, Interval, TangentField

__all__ = ["Curve", "EnergyParams", "Interval", "TangentField"]
__version__ = "0.1.0"
