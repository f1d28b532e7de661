"""Cascadic alternating minimization of the discrete path energy."""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np

from metamorph.geodesic.config import SolverConfig
from metamorph.geodesic.path import DiscretePath
from metamorph.geodesic.smoothing import presmooth
from metamorph.grid_fem import Grid, ScalarField, VectorField, displacement_values, image_values
from metamorph.image_solve import assemble_system, solve_images
from metamorph.registration import RegistrationResult, register
from metamorph.utils.errors import InvalidInputError, MetamorphError, SweepError

logger = logging.getLogger(__name__)

Pair = Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]


def midpoint_values(grid: Grid, values: np.ndarray, disp: np.ndarray) -> np.ndarray:
    """Nodal values of x ↦ U(x + ½(Φ(x) − x)) for nodal values (C, n_nodes)."""
    points = grid.clamp(grid.node_coords + 0.5 * disp.T)
    return grid.interpolate(values, points)


def warp_midpoint(u_b: ScalarField, phi: Optional[VectorField]) -> ScalarField:
    """
    Warp an image halfway along a deformation.

    Args:
        u_b: Image compared through Φ
        phi: Deformation (None = identity)

    Returns:
        Nodal interpolation of U_b∘(𝟙 + ½(Φ − 𝟙))
    """
    disp = displacement_values(phi, u_b.grid)
    return ScalarField(u_b.grid, midpoint_values(u_b.grid, u_b.values, disp))


def register_pairs(grid: Grid, pairs: Sequence[Pair], config: SolverConfig) -> List[RegistrationResult]:
    """
    Run independent registrations, in a thread pool when config.workers > 1.

    Results come back in the order of the pairs whatever the worker count.
    """
    def task(pair: Pair) -> RegistrationResult:
        u_prev, u_next, init = pair
        return register(grid, u_prev, u_next, init, config.material, config.registration)

    if config.workers > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(task, pairs))
    else:
        results = [task(pair) for pair in pairs]

    for k, result in enumerate(results, start=1):
        if result.stalled:
            logger.warning(f"Registration {k} stalled after {result.iterations} iterations")
        logger.debug(
            f"Registration {k}: {result.iterations} iterations, energy {result.final_energy:.6e}"
        )
    return results


def prolongate(path: DiscretePath, config: SolverConfig) -> DiscretePath:
    """
    Double the number of time steps.

    Coarse images become the even images of the finer path. Each coarse pair is
    registered from the identity and the odd image in between is the later image
    warped halfway along that deformation. All new deformations are the identity.

    Args:
        path: Path at level j−1
        config: Solver configuration

    Returns:
        Initial path at level j sharing the history of the coarse path
    """
    grid, K = path.grid, path.K
    pairs = [(path.images[k], path.images[k + 1], None) for k in range(K)]
    results = register_pairs(grid, pairs, config)

    fine = np.empty((2 * K + 1,) + path.images.shape[1:])
    fine[0::2] = path.images
    for k, result in enumerate(results):
        fine[2 * k + 1] = midpoint_values(grid, path.images[k + 1], result.deformation.displacement)

    finer = DiscretePath(
        grid=grid,
        level=path.level + 1,
        images=fine,
        displacements=np.zeros((2 * K, 2, grid.n_nodes)),
        history=path.history,
        level_images=path.level_images,
    )
    finer.record(0, "initial", config.material)
    return finer


def alternate(path: DiscretePath, config: SolverConfig) -> DiscretePath:
    """
    Alternate between registrations and the image solve until the images settle.

    Each sweep first re-registers every consecutive pair, warm-started at the
    current deformation, then solves for all interior images at once. The loop
    stops once the Euclidean norm of the change of the stacked interior images
    drops to config.threshold, or after config.max_sweeps sweeps.

    Args:
        path: Path whose endpoints stay fixed; updated in place
        config: Solver configuration

    Returns:
        The same path object, converged
    """
    params = config.material
    grid = path.grid
    if not path.final_records():
        path.record(0, "initial", params)

    converged = False
    for sweep in range(1, config.max_sweeps + 1):
        try:
            pairs = [(path.images[k], path.images[k + 1], path.displacements[k]) for k in range(path.K)]
            results = register_pairs(grid, pairs, config)
            path.displacements = np.stack([r.deformation.displacement for r in results])
            path.record(sweep, "registration", params)

            change = 0.0
            if path.K >= 2:
                system = assemble_system(grid, list(path.displacements))
                interior = solve_images(
                    system, path.images[0], path.images[-1],
                    tol=config.cg.tol, maxiter=config.cg.maxiter, initial=path.images[1:-1],
                )
                change = float(np.linalg.norm(interior - path.images[1:-1]))
                path.images[1:-1] = interior
        except MetamorphError as exc:
            raise SweepError(sweep, exc) from exc

        entry = path.record(sweep, "images", params)
        logger.info(
            f"Level {path.level} sweep {sweep}: energy {entry.energy:.6e}, image change {change:.3e}"
        )
        if change <= config.threshold:
            converged = True
            break

    if not converged:
        logger.warning(f"Level {path.level}: sweep cap {config.max_sweeps} reached before the threshold")
    path.level_images[path.level] = path.images.copy()
    return path


def run_cascadic(image_a: ScalarField, image_b: ScalarField, config: SolverConfig) -> DiscretePath:
    """
    Compute a discrete geodesic between two images.

    The inputs are pre-smoothed once. Starting from the two-image path, every
    level doubles K by prolongation and then runs the alternation, until
    K = 2^J.

    Args:
        image_a: Start image
        image_b: End image, same grid and channel count
        config: Solver configuration

    Returns:
        The path at the finest level with the full energy history
    """
    if image_a.grid != image_b.grid:
        raise InvalidInputError(f"Input grids differ: {image_a.grid} vs {image_b.grid}")
    if image_a.channels != image_b.channels:
        raise InvalidInputError(f"Channel counts differ: {image_a.channels} vs {image_b.channels}")

    grid = image_a.grid
    sigma2 = config.smoothing_variance(grid, image_a.channels)
    start, end = presmooth(image_a, sigma2), presmooth(image_b, sigma2)
    logger.info(
        f"Cascadic solve on {grid.nx}x{grid.ny} grid, {image_a.channels} channel(s), "
        f"J={config.levels}, sigma2={sigma2:.4g}, model {config.material.summary()}"
    )

    path = DiscretePath(
        grid=grid,
        level=0,
        images=np.stack([image_values(start), image_values(end)]),
        displacements=np.zeros((1, 2, grid.n_nodes)),
    )
    path.record(0, "initial", config.material)
    path.level_images[0] = path.images.copy()

    for level in range(1, config.levels + 1):
        logger.info(f"Level {level}: K={2 ** level}")
        path = prolongate(path, config)
        path = alternate(path, config)
    return path
