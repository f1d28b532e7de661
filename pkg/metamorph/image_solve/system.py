"""Block tridiagonal system for the intermediate images of a path.

For fixed deformations the image part of the path energy is

    Σ_k  Ū_kᵀ M[Φ_k,Φ_k] Ū_k − 2 Ū_kᵀ M[Φ_k,𝟙] Ū_{k−1} + Ū_{k−1}ᵀ M Ū_{k−1},

a strictly convex quadratic in (Ū_1..Ū_{K−1}); its normal equations are the
system assembled here.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Sequence

import numpy as np
from scipy import sparse

from metamorph.grid_fem import Grid, image_values, displacement_values, standard_mass
from metamorph.grid_fem.assembly import assemble_warped_mass
from metamorph.image_solve.pcg import pcg
from metamorph.utils.errors import InvalidInputError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class BlockTridiagonal:
    """
    The (K−1)x(K−1) block matrix A[Φ] and the data of its right-hand side.

    diagonal[k-1]   = M[Φ_k,Φ_k] + M[𝟙,𝟙]              (k = 1..K−1)
    lower[k-1]      = A_{k+1,k} = −M[Φ_{k+1},𝟙]          (k = 1..K−2)
    A_{k,k+1}       = lower[k-1]ᵀ
    R_1 ∋ M[Φ_1,𝟙] Ū_A,  R_{K−1} ∋ M[Φ_K,𝟙]ᵀ Ū_B
    """
    grid: Grid
    diagonal: List[sparse.csr_matrix] = field(repr=False)
    lower: List[sparse.csr_matrix] = field(repr=False)
    first_coupling: sparse.csr_matrix = field(repr=False)
    last_coupling: sparse.csr_matrix = field(repr=False)

    @property
    def K(self) -> int:
        return len(self.diagonal) + 1

    @cached_property
    def matrix(self) -> sparse.csr_matrix:
        """The assembled symmetric matrix of size (K−1)·n_nodes."""
        blocks: List[List[Optional[sparse.spmatrix]]] = [
            [None] * (self.K - 1) for _ in range(self.K - 1)
        ]
        for i, block in enumerate(self.diagonal):
            blocks[i][i] = block
        for i, block in enumerate(self.lower):
            blocks[i + 1][i] = block
            blocks[i][i + 1] = block.T
        return sparse.bmat(blocks, format="csr")

    @cached_property
    def preconditioner(self) -> np.ndarray:
        return self.matrix.diagonal()

    def rhs(self, u_a: np.ndarray, u_b: np.ndarray) -> np.ndarray:
        """
        Stacked right-hand side per channel.

        Args:
            u_a: Start image, shape (C, n_nodes)
            u_b: End image, shape (C, n_nodes)

        Returns:
            Array of shape (C, (K−1)·n_nodes)
        """
        n = self.grid.n_nodes
        rhs = np.zeros((u_a.shape[0], (self.K - 1) * n))
        rhs[:, :n] += (self.first_coupling @ u_a.T).T
        rhs[:, -n:] += (self.last_coupling.T @ u_b.T).T
        return rhs


def assemble_system(grid: Grid, deformations: Sequence) -> BlockTridiagonal:
    """
    Assemble A[Φ] for deformations Φ_1..Φ_K.

    Args:
        grid: The grid
        deformations: K deformations (VectorField, displacement array or None)

    Returns:
        The block system
    """
    K = len(deformations)
    if K < 2:
        raise InvalidInputError(f"A path with K={K} has no interior images")

    mass = standard_mass(grid)
    disps = [displacement_values(phi, grid) for phi in deformations]
    couplings = [assemble_warped_mass(grid, d, None) for d in disps]
    diagonal = [assemble_warped_mass(grid, d, d) + mass for d in disps[:-1]]
    lower = [-couplings[k] for k in range(1, K - 1)]
    logger.debug(f"Assembled block system with K={K} on {grid.nx}x{grid.ny} grid")
    return BlockTridiagonal(
        grid=grid,
        diagonal=diagonal,
        lower=lower,
        first_coupling=couplings[0],
        last_coupling=couplings[-1],
    )


def solve_images(system: BlockTridiagonal, u_a, u_b, tol: float = 1e-8,
                 maxiter: Optional[int] = None, initial: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Solve for the optimal interior images U_1..U_{K−1}.

    Every channel is solved against the same matrix.

    Args:
        system: Assembled block system
        u_a: Start image U_A (ScalarField or (C, n_nodes) array)
        u_b: End image U_B
        tol: Relative residual tolerance of CG
        maxiter: CG iteration budget (default 1000·K)
        initial: Optional warm start of shape (K−1, C, n_nodes)

    Returns:
        Array of shape (K−1, C, n_nodes)
    """
    ua, ub = image_values(u_a), image_values(u_b)
    if ua.shape != ub.shape:
        raise InvalidInputError(f"Endpoint shapes differ: {ua.shape} vs {ub.shape}")
    K, n = system.K, system.grid.n_nodes
    maxiter = maxiter or 1000 * K
    rhs = system.rhs(ua, ub)

    solution = np.empty((ua.shape[0], (K - 1) * n))
    for c in range(ua.shape[0]):
        x0 = None if initial is None else initial[:, c, :].ravel()
        x, iterations, residual = pcg(system.matrix, rhs[c], system.preconditioner,
                                      x0=x0, tol=tol, maxiter=maxiter)
        logger.debug(f"Channel {c}: CG {iterations} iterations, residual {residual:.2e}")
        solution[c] = x

    images = solution.reshape(ua.shape[0], K - 1, n).transpose(1, 0, 2)
    low = min(ua.min(), ub.min()) - 1e-9
    high = max(ua.max(), ub.max()) + 1e-9
    if images.min() < low or images.max() > high:
        logger.debug(f"Interior images leave the endpoint range [{low:.4f}, {high:.4f}]")
    return images


def pointwise_image_formula(u_prev_val: float, u_next_val: float, detinv: float) -> float:
    """
    Pointwise optimal image value between two warped neighbours.

    Args:
        u_prev_val: Value of U_{k−1} transported to x
        u_next_val: Value of U_{k+1}∘φ_{k+1} at x
        detinv: (det Dφ_k)^{−1}∘φ_k^{−1} at x

    Returns:
        (u_next_val + u_prev_val·detinv) / (1 + detinv)
    """
    return (u_next_val + u_prev_val * detinv) / (1.0 + detinv)
