"""Fixed-point laboratory for locally asymptotically nonexpansive and contractive maps."""
from .space import Ball, BallPlusPoints, Box, Hull, Vec
from .operators import ExampleParams, OperatorSpec, affine, example32, rotation, scale
from .iterate import StepSchedule, picard, schu

__all__ = [
    "Ball", "BallPlusPoints", "Box", "Hull", "Vec",
    "ExampleParams", "OperatorSpec", "affine", "example32", "rotation", "scale",
    "StepSchedule", "picard", "schu",
]
__version__ = "0.1.0"
