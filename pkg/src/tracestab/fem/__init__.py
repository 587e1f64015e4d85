"""Finite-element discretization of the trace and Robin quotients."""

from .mesh import INNER, OUTER, MeshResolutionError, TriMesh, mesh_domain
from .solver import (
    Discretization,
    NonConvergenceError,
    RobinResult,
    SolveResult,
    SolverOptions,
    linear_steklov_reference,
    minimize_trace_quotient,
    radiality_check,
    robin_neumann_fem,
)

__all__ = [
    "INNER",
    "OUTER",
    "Discretization",
    "MeshResolutionError",
    "NonConvergenceError",
    "RobinResult",
    "SolveResult",
    "SolverOptions",
    "TriMesh",
    "linear_steklov_reference",
    "mesh_domain",
    "minimize_trace_quotient",
    "radiality_check",
    "robin_neumann_fem",
]
