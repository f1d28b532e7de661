"""Transport paths, material derivatives and continuous-time frames of a discrete path."""

import logging
import math
from typing import Sequence

import numpy as np

from metamorph.geodesic.path import DiscretePath
from metamorph.grid_fem import Grid, ScalarField, VectorField, simpson_rule
from metamorph.utils.errors import InvalidInputError, NonContractiveError

logger = logging.getLogger(__name__)

INTEGER_TIME_TOLERANCE = 1e-12


def transport_path(deformations: Sequence[VectorField], x: np.ndarray) -> np.ndarray:
    """
    Follow points along the deformations: X_0 = x, X_k = Φ_k(X_{k−1}).

    Args:
        deformations: Φ_1..Φ_K
        x: A point (2,) or points (P, 2)

    Returns:
        Array (K+1, 2) for one point, otherwise (K+1, P, 2)
    """
    x = np.asarray(x, dtype=float)
    current = x.reshape(-1, 2)
    if deformations:
        current = deformations[0].grid.clamp(current)
    points = [current]
    for phi in deformations:
        current = phi(current)
        points.append(current)
    stacked = np.stack(points)
    return stacked[:, 0, :] if x.ndim == 1 else stacked


def accumulated_material_derivative(path: DiscretePath, l: int) -> ScalarField:
    """
    Z_l = K Σ_{k=1..l} (U_k∘Φ_k − U_{k−1})∘X_{k−1}, evaluated at every node.
    """
    if not 1 <= l <= path.K:
        raise InvalidInputError(f"Material derivative index {l} outside 1..{path.K}")
    grid = path.grid
    deformations = [path.deformation(k) for k in range(1, l + 1)]
    X = transport_path(deformations, grid.node_coords)

    total = np.zeros((path.channels, grid.n_nodes))
    for k in range(1, l + 1):
        total += grid.interpolate(path.images[k], X[k]) - grid.interpolate(path.images[k - 1], X[k - 1])
    return ScalarField(grid, path.K * total)


def contraction_factor(grid: Grid, disp: np.ndarray, scale: float) -> float:
    """Largest spectral norm of scale·D(Φ − 𝟙) over all cells."""
    grads = np.moveaxis(simpson_rule(grid).cell_gradients(disp), 0, -2)  # (n_cells, 9, 2, 2)
    if grads.size == 0:
        return 0.0
    return float(scale * np.max(np.linalg.norm(grads, ord=2, axis=(-2, -1))))


def invert_transport(grid: Grid, disp: np.ndarray, scale: float, y: np.ndarray,
                     tol: float = 1e-10, maxiter: int = 50, segment: int = 1) -> np.ndarray:
    """
    Solve x + scale·(Φ(x) − x) = y for x by fixed-point iteration.

    Args:
        grid: The grid
        disp: Nodal displacement of Φ
        scale: K·(t − t_{k−1}), in [0, 1)
        y: Target points (P, 2)
        tol: Stop once an update moves no point further than this
        maxiter: Iteration budget
        segment: Segment index used in error messages

    Returns:
        Points x of shape (P, 2)
    """
    contraction = contraction_factor(grid, disp, scale)
    if contraction >= 1.0:
        raise NonContractiveError(
            f"transport map is not invertible by fixed-point iteration (factor {contraction:.3f})",
            segment, contraction,
        )

    x = np.array(y, dtype=float)
    for iteration in range(1, maxiter + 1):
        x_new = grid.clamp(y - scale * grid.interpolate(disp, x).T)
        step = float(np.max(np.abs(x_new - x))) if x.size else 0.0
        x = x_new
        if step <= tol:
            logger.debug(f"Segment {segment}: inversion converged in {iteration} iterations")
            return x
    raise NonContractiveError(f"fixed-point inversion did not reach {tol:g} in {maxiter} iterations",
                              segment, contraction)


def time_interpolate(path: DiscretePath, t: float, inversion_tol: float = 1e-10,
                     inversion_maxiter: int = 50) -> ScalarField:
    """
    Image of the path at continuous time t ∈ [0, 1].

    Within segment k the image is the blend U_{k−1} + K(t − t_{k−1})(U_k∘Φ_k − U_{k−1})
    transported along y_k(t, x) = x + K(t − t_{k−1})(Φ_k(x) − x).

    Args:
        path: A discrete path
        t: Time
        inversion_tol: Tolerance of the fixed-point inversion of y_k(t, ·)
        inversion_maxiter: Iteration budget of the inversion

    Returns:
        The interpolated image
    """
    if not 0.0 <= t <= 1.0:
        raise InvalidInputError(f"Time {t} outside [0, 1]")
    K = path.K
    position = t * K
    nearest = round(position)
    if abs(position - nearest) <= INTEGER_TIME_TOLERANCE:
        return path.image(int(nearest))

    k = int(math.floor(position)) + 1
    scale = position - (k - 1)
    grid = path.grid
    x = invert_transport(grid, path.displacements[k - 1], scale, grid.node_coords,
                         tol=inversion_tol, maxiter=inversion_maxiter, segment=k)
    u_prev = grid.interpolate(path.images[k - 1], x)
    u_next = grid.interpolate(path.images[k], path.deformation(k)(x))
    return ScalarField(grid, u_prev + scale * (u_next - u_prev))
