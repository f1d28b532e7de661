"""Self-checks of the numerical building blocks on small synthetic inputs."""

import logging
import time
from dataclasses import dataclass
from typing import Callable, List, Tuple

import numpy as np
import pandas as pd

from metamorph.energy import MaterialParams, ModelKind, density_W, density_W_derivative, ogden_coeffs
from metamorph.energy import gradient_values, pair_energy, path_energy, second_derivative_check
from metamorph.geodesic import SolverConfig, alternate, DiscretePath
from metamorph.grid_fem import Grid, make_grid, quad_integrate
from metamorph.image_solve import assemble_system, solve_images

logger = logging.getLogger(__name__)

FULL_MODEL = dict(kind=ModelKind.OGDEN, lam=1.0, mu=0.5, q=1.5, r=1.5, s=0.5)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def smooth_displacement(grid: Grid, amplitude: float, rng: np.random.Generator) -> np.ndarray:
    """Random combination of low sine modes; zero on the boundary."""
    x, y = grid.node_coords[:, 0] / grid.width, grid.node_coords[:, 1] / grid.height
    disp = np.zeros((2, grid.n_nodes))
    for comp in range(2):
        for a in (1, 2):
            for b in (1, 2):
                disp[comp] += rng.uniform(-1, 1) * np.sin(a * np.pi * x) * np.sin(b * np.pi * y)
    disp *= amplitude / max(np.max(np.abs(disp)), 1e-300)
    disp[:, grid.boundary_mask] = 0.0
    return disp


def smooth_image(grid: Grid, phase: float = 0.0) -> np.ndarray:
    x, y = grid.node_coords[:, 0], grid.node_coords[:, 1]
    return (0.5 + 0.3 * np.sin(3.0 * x + phase) * np.cos(2.0 * y - phase))[None, :]


def check_ogden_consistency() -> Tuple[bool, str]:
    params = MaterialParams(**FULL_MODEL)
    a1, a2, a3, a4 = ogden_coeffs(1.0, 0.5, 1.5, 1.5, 0.5)
    expected = (2.0 ** -1.5 * 0.5 / 1.5, 1.0 / 6.0, 1.5, -2.0)
    coeff_err = max(abs(c - e) / abs(e) for c, e in zip((a1, a2, a3, a4), expected))
    w_id = density_W(np.eye(2), params)
    dw_id = float(np.linalg.norm(density_W_derivative(np.eye(2), params)))
    rng = np.random.default_rng(0)
    hess_err = 0.0
    for _ in range(10):
        fd, analytic = second_derivative_check(rng.normal(size=(2, 2)), params)
        hess_err = max(hess_err, abs(fd - analytic) / max(abs(analytic), 1e-12))
    passed = coeff_err < 1e-12 and w_id == 0.0 and dw_id < 1e-10 and hess_err < 1e-4
    return passed, f"coeff {coeff_err:.1e}, W(1)={w_id:.1e}, |DW(1)|={dw_id:.1e}, D2W {hess_err:.1e}"


def check_gradient_oracle() -> Tuple[bool, str]:
    grid = make_grid(8, 8)
    rng = np.random.default_rng(1)
    u_prev, u_next = smooth_image(grid), smooth_image(grid, 0.4)
    worst = 0.0
    for params in (MaterialParams(kind=ModelKind.SIMPLIFIED), MaterialParams(**FULL_MODEL, gamma=1e-3)):
        disp = smooth_displacement(grid, 0.02, rng)
        grad = gradient_values(grid, u_prev, u_next, disp, params)
        eps = 1e-6
        for _ in range(20):
            v = smooth_displacement(grid, 1.0, rng)
            e_plus = pair_energy(grid, u_prev, u_next, disp + eps * v, params).total
            e_minus = pair_energy(grid, u_prev, u_next, disp - eps * v, params).total
            fd = (e_plus - e_minus) / (2 * eps)
            analytic = float(np.sum(grad * v))
            worst = max(worst, abs(fd - analytic) / max(abs(analytic), 1e-8))
    return worst < 1e-5, f"max rel. error {worst:.2e}"


def check_image_solve_oracle() -> Tuple[bool, str]:
    grid = make_grid(4, 4)
    rng = np.random.default_rng(2)
    interior = ~grid.boundary_mask
    deformations = []
    for _ in range(3):
        d = np.zeros((2, grid.n_nodes))
        d[:, interior] = rng.uniform(-0.1, 0.1, size=(2, int(interior.sum())))
        deformations.append(d)
    u_a, u_b = rng.uniform(size=(1, grid.n_nodes)), rng.uniform(size=(1, grid.n_nodes))
    system = assemble_system(grid, deformations)
    dense = system.matrix.toarray()
    direct = np.linalg.solve(dense, system.rhs(u_a, u_b)[0])
    iterative = solve_images(system, u_a, u_b, tol=1e-12).reshape(-1)
    err = float(np.max(np.abs(direct - iterative)))
    asym = float(np.max(np.abs(dense - dense.T)))
    lam_min = float(np.min(np.linalg.eigvalsh(dense)))
    return err < 1e-8 and asym == 0.0 and lam_min > 0, f"err {err:.1e}, asym {asym:.1e}, min eig {lam_min:.2e}"


def check_quadrature() -> Tuple[bool, str]:
    cell = Grid(nx=2, ny=2, h=1.0)
    quartic = quad_integrate(cell, lambda p: p[:, 0] ** 4)
    rng = np.random.default_rng(3)
    grid = make_grid(5, 4)
    worst = 0.0
    for _ in range(5):
        cx, cy = rng.normal(size=4), rng.normal(size=4)
        value = quad_integrate(grid, lambda p: np.polyval(cx, p[:, 0]) * np.polyval(cy, p[:, 1]))
        px, py = np.polyint(cx), np.polyint(cy)
        exact = (np.polyval(px, grid.width) - np.polyval(px, 0)) * (np.polyval(py, grid.height) - np.polyval(py, 0))
        worst = max(worst, abs(value - exact))
    return abs(quartic - 5.0 / 24.0) < 1e-15 and worst < 1e-12, f"x^4 -> {quartic:.15f}, cubic err {worst:.1e}"


def check_trivial_geodesics() -> Tuple[bool, str]:
    grid = make_grid(6, 6)
    u = smooth_image(grid)
    config = SolverConfig(levels=1, material=MaterialParams(**FULL_MODEL, gamma=1e-3), workers=1)
    same = DiscretePath(grid, 2, np.repeat(u[None], 5, axis=0), np.zeros((4, 2, grid.n_nodes)))
    same = alternate(same, config)
    energy = same.energy(config.material).scaled_total

    zeros, ones = np.zeros((1, grid.n_nodes)), np.ones((1, grid.n_nodes))
    system = assemble_system(grid, [None] * 4)
    ramp = solve_images(system, zeros, ones, tol=1e-12)
    ramp_err = max(float(np.max(np.abs(ramp[k - 1] - k / 4.0))) for k in range(1, 4))

    images = [zeros] + list(ramp) + [ones]
    blend = path_energy(grid, images, [None] * 4, MaterialParams()).scaled_total
    expected = 4 * 4 * (0.25 ** 2) * grid.area / MaterialParams().delta
    return (energy <= 1e-12 and ramp_err < 1e-8 and abs(blend - expected) < 1e-8,
            f"constant-path energy {energy:.1e}, ramp err {ramp_err:.1e}")


CHECKS: List[Tuple[str, Callable[[], Tuple[bool, str]]]] = [
    ("ogden consistency", check_ogden_consistency),
    ("gradient oracle", check_gradient_oracle),
    ("image-solve oracle", check_image_solve_oracle),
    ("quadrature exactness", check_quadrature),
    ("trivial geodesics", check_trivial_geodesics),
]


def run_validation() -> List[CheckResult]:
    """Run every check; an exception counts as a failure."""
    results = []
    for name, check in CHECKS:
        start = time.perf_counter()
        try:
            passed, detail = check()
        except Exception as exc:
            logger.exception(f"Check '{name}' raised")
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, bool(passed), detail, time.perf_counter() - start))
        logger.info(f"{name}: {'pass' if passed else 'FAIL'} ({detail})")
    return results


def results_table(results: List[CheckResult]) -> str:
    frame = pd.DataFrame([
        {"check": r.name, "result": "pass" if r.passed else "FAIL", "seconds": round(r.seconds, 3), "detail": r.detail}
        for r in results
    ])
    return frame.to_string(index=False)
