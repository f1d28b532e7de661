"""Cell-wise assembly of mass, warped mass and stiffness matrices."""

import logging
from functools import lru_cache
from typing import Optional, Union

import numpy as np
from scipy import sparse

from metamorph.grid_fem.grid import Grid, VectorField, displacement_values
from metamorph.grid_fem.quadrature import simpson_rule

logger = logging.getLogger(__name__)

Deformation = Optional[Union[VectorField, np.ndarray]]


def accumulate(rows: np.ndarray, cols: np.ndarray, data: np.ndarray, n: int) -> sparse.csr_matrix:
    """
    Sum contributions into a sparse n x n matrix in a fixed order.

    Contributions to the same entry are added in the order they are given,
    so assembling the same traversal twice gives bit-identical matrices.
    """
    keys = rows.astype(np.int64).ravel() * n + cols.astype(np.int64).ravel()
    data = data.ravel()
    order = np.argsort(keys, kind="stable")
    keys = keys[order]
    data = data[order]
    starts = np.flatnonzero(np.concatenate(([True], keys[1:] != keys[:-1])))
    sums = np.add.reduceat(data, starts)
    unique = keys[starts]
    return sparse.csr_matrix((sums, (unique // n, unique % n)), shape=(n, n))


def warped_points(grid: Grid, phi: Deformation) -> np.ndarray:
    """Images Φ(x_q) of all quadrature points, shape (n_cells * 9, 2)."""
    rule = simpson_rule(grid)
    disp = displacement_values(phi, grid)
    moved = rule.flat_points + rule.cell_values(disp).reshape(2, -1).T
    return grid.clamp(moved)


def assemble_warped_mass(grid: Grid, phi: Deformation = None, psi: Deformation = None) -> sparse.csr_matrix:
    """
    Assemble M_h[Φ,Ψ]_{ij} = Σ_l Σ_q w_q^l (Θ^i∘Φ)(x_q^l) (Θ^j∘Ψ)(x_q^l).

    Args:
        grid: The grid
        phi: Deformation applied to the row basis functions (None = identity)
        psi: Deformation applied to the column basis functions (None = identity)

    Returns:
        Sparse matrix of size n_nodes x n_nodes
    """
    rule = simpson_rule(grid)
    nodes_a, basis_a = grid.basis_at(warped_points(grid, phi))
    nodes_b, basis_b = grid.basis_at(warped_points(grid, psi))

    rows = np.broadcast_to(nodes_a[:, :, None], (nodes_a.shape[0], 4, 4))
    cols = np.broadcast_to(nodes_b[:, None, :], (nodes_b.shape[0], 4, 4))
    data = rule.flat_weights[:, None, None] * (basis_a[:, :, None] * basis_b[:, None, :])
    return accumulate(rows, cols, data, grid.n_nodes)


def assemble_stiffness(grid: Grid) -> sparse.csr_matrix:
    """Assemble S_h with entries Σ w ∇Θ^i·∇Θ^j over the Simpson points."""
    rule = simpson_rule(grid)
    element = np.einsum("q,qad,qbd->ab", rule.weights[0], rule.ref_gradient, rule.ref_gradient)
    nodes = grid.cell_nodes
    rows = np.broadcast_to(nodes[:, :, None], (grid.n_cells, 4, 4))
    cols = np.broadcast_to(nodes[:, None, :], (grid.n_cells, 4, 4))
    data = np.broadcast_to(element, (grid.n_cells, 4, 4))
    return accumulate(rows, cols, data, grid.n_nodes)


@lru_cache(maxsize=16)
def standard_mass(grid: Grid) -> sparse.csr_matrix:
    """M_h[𝟙,𝟙], cached per grid."""
    return assemble_warped_mass(grid)


@lru_cache(maxsize=16)
def stiffness(grid: Grid) -> sparse.csr_matrix:
    """S_h, cached per grid."""
    return assemble_stiffness(grid)


@lru_cache(maxsize=16)
def lumped_mass(grid: Grid) -> np.ndarray:
    """
    Row sums of the standard mass matrix.

    Returns:
        Diagonal entries, shape (n_nodes,)
    """
    return np.asarray(standard_mass(grid).sum(axis=1)).ravel()
