"""Simulation and verification toolkit for 1-D SDEs with additive symmetric
alpha-stable noise and bounded, possibly discontinuous drift."""

__version__ = "0.1.0"

from .drift import (
    Constant,
    DriftSequence,
    HolderPower,
    LinearGrowthCapped,
    MeasureSpec,
    MollifiedSign,
    PiecewiseConstant,
    Sign,
    Zero,
)
from .noise import LevyPath, PathGrid, StableParams, restrict_path, simulate_path
from .solver import SolutionPath, euler_solve, integral_residual

__all__ = [
    "Constant",
    "DriftSequence",
    "HolderPower",
    "LevyPath",
    "LinearGrowthCapped",
    "MeasureSpec",
    "MollifiedSign",
    "PathGrid",
    "PiecewiseConstant",
    "Sign",
    "SolutionPath",
    "StableParams",
    "Zero",
    "euler_solve",
    "integral_residual",
    "restrict_path",
    "simulate_path",
]
