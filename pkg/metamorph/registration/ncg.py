"""Fletcher-Reeves nonlinear conjugate gradients for a single registration."""

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, Field

from metamorph.energy import MaterialParams, pair_energy, gradient_values
from metamorph.grid_fem import Grid, VectorField, image_values, displacement_values
from metamorph.registration.metric import precondition_values
from metamorph.utils.errors import InadmissibleStateError

logger = logging.getLogger(__name__)


class RegistrationOptions(BaseModel):
    """Free parameters of the descent scheme."""
    max_iterations: int = Field(200, gt=0)
    gradient_tolerance: float = Field(1e-4, gt=0.0, description="relative preconditioned gradient norm")
    gradient_floor: float = Field(1e-12, gt=0.0, description="absolute preconditioned gradient norm")
    energy_tolerance: float = Field(1e-10, ge=0.0, description="relative energy decrease of one step")
    armijo_c: float = Field(1e-4, gt=0.0, lt=1.0)
    backtrack_factor: float = Field(0.5, gt=0.0, lt=1.0)
    max_backtracks: int = Field(30, gt=0)
    restart_period: int = Field(10, gt=0)
    h1_epsilon: float = Field(1.0, gt=0.0)
    initial_step: float = Field(1.0, gt=0.0)


@dataclass
class RegistrationResult:
    """Outcome of one registration."""
    deformation: VectorField
    iterations: int
    energy_trace: List[float] = field(default_factory=list)
    stalled: bool = False
    converged: bool = False

    @property
    def final_energy(self) -> float:
        return self.energy_trace[-1]


def register(grid: Grid, u_prev, u_next, phi_init: Optional[VectorField], params: MaterialParams,
             opts: Optional[RegistrationOptions] = None) -> RegistrationResult:
    """
    Minimize the pair energy over the deformation.

    Descent runs on the nodal displacement; directions are built from the
    H¹-preconditioned gradient with the Fletcher-Reeves update and every step
    is accepted by Armijo backtracking on the pair energy.

    The descent stops once the preconditioned gradient norm drops below
    gradient_tolerance times the larger of its value at the start and at the
    identity, or once a step lowers the energy by no more than
    energy_tolerance relative to it.

    Args:
        grid: The grid
        u_prev: Image U_{k-1}
        u_next: Image U_k
        phi_init: Starting deformation (None = identity)
        params: Material parameters
        opts: Descent options

    Returns:
        RegistrationResult with the final deformation and the energy trace
    """
    opts = opts or RegistrationOptions()
    up, un = image_values(u_prev), image_values(u_next)
    disp = displacement_values(phi_init, grid).copy()

    def energy(d: np.ndarray) -> float:
        return pair_energy(grid, up, un, d, params).total

    def gradient(d: np.ndarray):
        g = gradient_values(grid, up, un, d, params)
        return g, precondition_values(grid, g, opts.h1_epsilon)

    current = energy(disp)
    if not np.isfinite(current):
        raise InadmissibleStateError("Initial deformation of the registration is not admissible")
    trace = [current]

    g, g_tilde = gradient(disp)
    g_dot = float(np.sum(g_tilde * g))
    norm0 = np.sqrt(max(g_dot, 0.0))

    # warm starts are measured against the gradient at the identity of the same pair
    reference = norm0
    if np.any(disp != 0.0):
        g_id, g_tilde_id = gradient(np.zeros_like(disp))
        reference = max(reference, np.sqrt(max(float(np.sum(g_tilde_id * g_id)), 0.0)))
    stop_norm = max(opts.gradient_tolerance * reference, opts.gradient_floor)

    if norm0 <= stop_norm:
        logger.debug(f"Registration started at a stationary point, |g| {norm0:.3e} <= {stop_norm:.3e}")
        return RegistrationResult(VectorField(grid, disp), 0, trace, converged=True)

    direction = -g_tilde
    last_step = None
    stalled = converged = False
    iteration = 0

    for iteration in range(1, opts.max_iterations + 1):
        slope = float(np.sum(g * direction))
        if (iteration - 1) % opts.restart_period == 0 or slope >= 0.0:
            direction = -g_tilde
            slope = -g_dot

        sigma = opts.initial_step if last_step is None else 2.0 * last_step
        accepted = False
        for _ in range(opts.max_backtracks):
            trial = disp + sigma * direction
            trial_energy = energy(trial)
            if trial_energy <= current + opts.armijo_c * sigma * slope:
                accepted = True
                break
            sigma *= opts.backtrack_factor

        if not accepted:
            stalled = True
            logger.debug(f"Line search stalled at iteration {iteration}, energy {current:.6e}")
            iteration -= 1
            break

        previous = current
        disp, current, last_step = trial, trial_energy, sigma
        trace.append(current)
        if previous - current <= opts.energy_tolerance * abs(previous):
            logger.debug(f"NCG iteration {iteration}: energy settled at {current:.6e}")
            converged = True
            break

        g_new, g_tilde_new = gradient(disp)
        g_dot_new = float(np.sum(g_tilde_new * g_new))
        norm = np.sqrt(max(g_dot_new, 0.0))
        logger.debug(f"NCG iteration {iteration}: energy {current:.6e}, step {sigma:.3e}, |g| {norm:.3e}")

        if norm <= stop_norm:
            converged = True
            break

        beta = g_dot_new / g_dot
        direction = -g_tilde_new + beta * direction
        g, g_tilde, g_dot = g_new, g_tilde_new, g_dot_new

    return RegistrationResult(
        deformation=VectorField(grid, disp),
        iterations=iteration,
        energy_trace=trace,
        stalled=stalled,
        converged=converged,
    )
