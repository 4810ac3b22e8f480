"""Simulator for three quantum identity authentication schemes and attacks on them."""

from .runtime import AuthKey, ProtocolReport, Thresholds, rng_substream

__all__ = ["AuthKey", "ProtocolReport", "Thresholds", "rng_substream"]
__version__ = "0.1.0"
