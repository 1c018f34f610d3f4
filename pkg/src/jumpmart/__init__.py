"""Exponential martingales of jump local martingales: simulation and verification."""

from jumpmart.paths import JumpEvent, ModelSpec, SamplePath, evaluate
from jumpmart.rng import RngStream
from jumpmart.estimators import McEstimate

__version__ = "0.1.0"

__all__ = [
    "JumpEvent",
    "McEstimate",
    "ModelSpec",
    "RngStream",
    "SamplePath",
    "evaluate",
    "__version__",
]
