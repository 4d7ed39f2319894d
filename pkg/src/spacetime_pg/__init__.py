"""Minimal residual space-time Petrov-Galerkin solver for the heat equation."""

from .glsqr import SolveReport, solve
from .spatial import SpatialMesh, SpatialOperators, assemble_MA, generate_lshape, unit_interval
from .system import SpaceTimeSystem, TestVector
from .temporal import TemporalMesh, temporal_operators

__all__ = [
    "SolveReport",
    "SpaceTimeSystem",
    "SpatialMesh",
    "SpatialOperators",
    "TemporalMesh",
    "TestVector",
    "assemble_MA",
    "generate_lshape",
    "solve",
    "temporal_operators",
    "unit_interval",
]
