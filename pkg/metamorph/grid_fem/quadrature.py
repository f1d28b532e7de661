"""Tensor-product Simpson quadrature on the cells of a grid."""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from metamorph.grid_fem.grid import Grid, bilinear_basis, bilinear_basis_gradient

logger = logging.getLogger(__name__)

SIMPSON_NODES = np.array([0.0, 0.5, 1.0])
SIMPSON_WEIGHTS = np.array([1.0, 4.0, 1.0]) / 6.0

# local point q = 3*b + a sits at (SIMPSON_NODES[a], SIMPSON_NODES[b])
_REF_S = np.tile(SIMPSON_NODES, 3)
_REF_T = np.repeat(SIMPSON_NODES, 3)
_REF_W = np.outer(SIMPSON_WEIGHTS, SIMPSON_WEIGHTS).ravel()


@dataclass(frozen=True, eq=False)
class QuadRule:
    """Nine Simpson points and weights for every cell of a grid."""
    grid: Grid
    points: np.ndarray        # (n_cells, 9, 2)
    weights: np.ndarray       # (n_cells, 9), each row sums to h^2
    ref_basis: np.ndarray     # (9, 4) basis values at the local points
    ref_gradient: np.ndarray  # (9, 4, 2) physical basis gradients at the local points

    @property
    def flat_points(self) -> np.ndarray:
        return self.points.reshape(-1, 2)

    @property
    def flat_weights(self) -> np.ndarray:
        return self.weights.ravel()

    def cell_values(self, values: np.ndarray) -> np.ndarray:
        """Nodal fields (C, n_nodes) evaluated at the points of their own cells, (C, n_cells, 9)."""
        return np.einsum("cma,qa->cmq", values[:, self.grid.cell_nodes], self.ref_basis)

    def cell_gradients(self, values: np.ndarray) -> np.ndarray:
        """Gradients of nodal fields at the points of their own cells, (C, n_cells, 9, 2)."""
        return np.einsum("cma,qad->cmqd", values[:, self.grid.cell_nodes], self.ref_gradient)


@lru_cache(maxsize=16)
def simpson_rule(grid: Grid) -> QuadRule:
    """Build (and cache) the quadrature rule of a grid."""
    corners = grid.node_coords[grid.cell_nodes[:, 0]]
    offsets = np.column_stack([_REF_S, _REF_T]) * grid.h
    points = corners[:, None, :] + offsets[None, :, :]
    weights = np.broadcast_to(_REF_W * grid.h ** 2, (grid.n_cells, 9)).copy()
    logger.debug(f"Built Simpson rule with {points.shape[0] * 9} points for {grid.nx}x{grid.ny} grid")
    return QuadRule(
        grid=grid,
        points=points,
        weights=weights,
        ref_basis=bilinear_basis(_REF_S, _REF_T),
        ref_gradient=bilinear_basis_gradient(_REF_S, _REF_T) / grid.h,
    )


def quad_integrate(grid: Grid, f: Callable[[np.ndarray], np.ndarray]) -> float:
    """
    Integrate a pointwise function over the domain with the Simpson rule.

    Args:
        grid: The grid
        f: Vectorized function mapping points (P, 2) to values (P,)

    Returns:
        Sum over cells and points of weight times f
    """
    rule = simpson_rule(grid)
    points = rule.flat_points
    values = np.broadcast_to(np.asarray(f(points), dtype=float), (points.shape[0],))
    return float(np.sum(rule.flat_weights * values))
