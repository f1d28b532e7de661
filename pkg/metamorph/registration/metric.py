"""Regularized H¹ metric on displacements."""

import logging
from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from metamorph.grid_fem import Grid, VectorField, displacement_values, standard_mass, stiffness
from metamorph.utils.errors import ConvergenceError

logger = logging.getLogger(__name__)

RESIDUAL_TOLERANCE = 1e-8


@lru_cache(maxsize=16)
def _interior_operator(grid: Grid, epsilon: float) -> Tuple[np.ndarray, sparse.csc_matrix, object]:
    """Interior block of M + εS and its sparse LU factorization."""
    interior = np.flatnonzero(~grid.boundary_mask)
    operator = (standard_mass(grid) + epsilon * stiffness(grid)).tocsr()
    block = operator[interior][:, interior].tocsc()
    logger.debug(f"Factorizing H1 metric with eps={epsilon} on {interior.size} interior nodes")
    return interior, block, splu(block)


def precondition_values(grid: Grid, g: np.ndarray, epsilon: float = 1.0) -> np.ndarray:
    """Solve (M + εS) g̃ = g on interior nodes; g̃ is zero on the boundary."""
    out = np.zeros_like(g, dtype=float)
    interior, block, lu = _interior_operator(grid, float(epsilon))
    if interior.size == 0:
        return out
    rhs = np.ascontiguousarray(g[:, interior].T, dtype=float)
    solution = lu.solve(rhs)
    rhs_norm = np.linalg.norm(rhs)
    residual = np.linalg.norm(block @ solution - rhs) / rhs_norm if rhs_norm > 0 else 0.0
    if not np.all(np.isfinite(solution)) or residual > RESIDUAL_TOLERANCE:
        raise ConvergenceError("H1 metric solve failed", float(residual), 1)
    out[:, interior] = solution.T
    return out


def h1_precondition(grid: Grid, g: VectorField, epsilon: float = 1.0) -> VectorField:
    """
    Represent a gradient in the regularized H¹ metric.

    Args:
        grid: The grid
        g: Nodal gradient, zero on boundary nodes
        epsilon: Weight of the stiffness part

    Returns:
        Smoothed gradient g̃ with (M + εS) g̃ = g on interior nodes
    """
    return VectorField(grid, precondition_values(grid, displacement_values(g, grid), epsilon))
