"""Discrete pair and path energies and the deformation gradient."""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from metamorph.energy.density import density_W, density_W_derivative
from metamorph.energy.params import MaterialParams, ModelKind
from metamorph.grid_fem import (
    Grid,
    ScalarField,
    VectorField,
    image_values,
    displacement_values,
    simpson_rule,
    standard_mass,
    stiffness,
    lumped_mass,
)
from metamorph.grid_fem.assembly import warped_points
from metamorph.utils.errors import InvalidInputError

logger = logging.getLogger(__name__)

Image = Union[ScalarField, np.ndarray]
Deformation = Optional[Union[VectorField, np.ndarray]]


@dataclass(frozen=True)
class SegmentEnergy:
    """Energy contributions of one time step."""
    density: float
    higher_order: float
    matching: float

    @property
    def total(self) -> float:
        return self.density + self.higher_order + self.matching


@dataclass(frozen=True)
class EnergyBreakdown:
    """Per-segment contributions of a path (a single segment for a pair)."""
    segments: Tuple[SegmentEnergy, ...]

    @property
    def K(self) -> int:
        return len(self.segments)

    @property
    def density(self) -> float:
        return sum(seg.density for seg in self.segments)

    @property
    def higher_order(self) -> float:
        return sum(seg.higher_order for seg in self.segments)

    @property
    def matching(self) -> float:
        return sum(seg.matching for seg in self.segments)

    @property
    def total(self) -> float:
        """Sum of all segment energies without the factor K."""
        return sum(seg.total for seg in self.segments)

    @property
    def scaled_total(self) -> float:
        """The path energy E_K = K · total."""
        return self.K * self.total


def _channel_weights(params: MaterialParams, channels: int) -> np.ndarray:
    if params.channel_weights is None:
        return np.ones(channels)
    if len(params.channel_weights) != channels:
        raise InvalidInputError(
            f"{len(params.channel_weights)} channel weights given for {channels} channels"
        )
    return np.asarray(params.channel_weights, dtype=float)


def _check_pair(u_prev: np.ndarray, u_next: np.ndarray, grid: Grid) -> None:
    if u_prev.shape != u_next.shape:
        raise InvalidInputError(f"Image shapes differ: {u_prev.shape} vs {u_next.shape}")
    if u_prev.shape[1] != grid.n_nodes:
        raise InvalidInputError(f"Images have {u_prev.shape[1]} nodes, grid has {grid.n_nodes}")


def deformation_gradients(grid: Grid, disp: np.ndarray) -> np.ndarray:
    """DΦ at every quadrature point of its own cell, shape (n_cells, 9, 2, 2)."""
    grads = simpson_rule(grid).cell_gradients(disp)  # (2, n_cells, 9, 2)
    return np.eye(2) + np.moveaxis(grads, 0, 2)


def _operator_power(grid: Grid, disp: np.ndarray, power: int) -> np.ndarray:
    """Apply (M_lump⁻¹ S)^power to each displacement component."""
    S = stiffness(grid)
    inv_lumped = 1.0 / lumped_mass(grid)
    y = disp.T
    for _ in range(power):
        y = (S @ y) * inv_lumped[:, None]
    return y.T


def _operator_power_adjoint(grid: Grid, z: np.ndarray, power: int) -> np.ndarray:
    """Apply (S M_lump⁻¹)^power, the transpose of _operator_power."""
    S = stiffness(grid)
    inv_lumped = 1.0 / lumped_mass(grid)
    y = z.T
    for _ in range(power):
        y = S @ (y * inv_lumped[:, None])
    return y.T


def higher_order_energy(grid: Grid, phi: Deformation, params: MaterialParams) -> float:
    """
    γ Σ_n ⟨M y^n, y^n⟩ with y^n = (M_lump⁻¹ S)^{m/2} applied to displacement component n.

    Args:
        grid: The grid
        phi: Deformation (None = identity)
        params: Material parameters

    Returns:
        The higher-order regularization energy
    """
    if params.gamma == 0.0:
        return 0.0
    y = _operator_power(grid, displacement_values(phi, grid), params.order // 2)
    My = (standard_mass(grid) @ y.T).T
    return float(params.gamma * np.sum(y * My))


def _density_term(grid: Grid, disp: np.ndarray, params: MaterialParams) -> float:
    rule = simpson_rule(grid)
    W = density_W(deformation_gradients(grid, disp), params)
    if not np.all(np.isfinite(W)):
        return float("inf")
    value = float(np.sum(rule.weights * W))
    if params.kind == ModelKind.SIMPLIFIED and params.identity_offset:
        value += 2.0 * grid.area
    return value


def _matching_residual(grid: Grid, u_prev: np.ndarray, u_next: np.ndarray, disp: np.ndarray):
    """Warped points and the residual U_next∘Φ - U_prev at every quadrature point."""
    rule = simpson_rule(grid)
    points = warped_points(grid, disp)
    residual = grid.interpolate(u_next, points) - grid.interpolate(u_prev, rule.flat_points)
    return points, residual


def pair_energy(grid: Grid, u_prev: Image, u_next: Image, phi: Deformation,
                params: MaterialParams) -> EnergyBreakdown:
    """
    Evaluate W^D[U_prev, U_next, Φ] with the Simpson rule.

    Args:
        grid: The grid
        u_prev: Image U_{k-1}
        u_next: Image U_k, compared after composition with Φ
        phi: Deformation Φ_k (None = identity)
        params: Material parameters

    Returns:
        Breakdown with a single segment
    """
    up, un = image_values(u_prev), image_values(u_next)
    _check_pair(up, un, grid)
    disp = displacement_values(phi, grid)
    rule = simpson_rule(grid)

    density = _density_term(grid, disp, params)
    higher = higher_order_energy(grid, disp, params)

    _, residual = _matching_residual(grid, up, un, disp)
    weights = _channel_weights(params, up.shape[0])
    # per-channel sums combined exactly, so the channel order does not matter
    per_channel = np.sum(residual ** 2 * rule.flat_weights[None, :], axis=1)
    matching = math.fsum(weights * per_channel) / params.delta

    return EnergyBreakdown(segments=(SegmentEnergy(density, higher, matching),))


def path_energy(grid: Grid, images: Sequence[Image], deformations: Sequence[Deformation],
                params: MaterialParams) -> EnergyBreakdown:
    """
    Evaluate E_K = K Σ_k W^D[U_{k-1}, U_k, Φ_k].

    Args:
        grid: The grid
        images: U_0..U_K
        deformations: Φ_1..Φ_K

    Returns:
        Breakdown with one segment per time step; scaled_total is E_K
    """
    if len(images) != len(deformations) + 1:
        raise InvalidInputError(
            f"A path needs K+1 images for K deformations, got {len(images)} and {len(deformations)}"
        )
    segments: List[SegmentEnergy] = []
    for k, phi in enumerate(deformations, start=1):
        segments.extend(pair_energy(grid, images[k - 1], images[k], phi, params).segments)
    return EnergyBreakdown(segments=tuple(segments))


def gradient_values(grid: Grid, u_prev: Image, u_next: Image, phi: Deformation,
                    params: MaterialParams) -> np.ndarray:
    """Nodal gradient of the pair energy with respect to Φ, shape (2, n_nodes)."""
    up, un = image_values(u_prev), image_values(u_next)
    _check_pair(up, un, grid)
    disp = displacement_values(phi, grid)
    rule = simpson_rule(grid)
    n = grid.n_nodes
    cell_nodes = grid.cell_nodes.ravel()
    grad = np.zeros((2, n))

    # elastic part: Σ w W_{,A}(DΦ) : DΘ
    WA = density_W_derivative(deformation_gradients(grid, disp), params)
    local = np.einsum("mq,mqnd,qad->nma", rule.weights, WA, rule.ref_gradient)
    for comp in range(2):
        grad[comp] += np.bincount(cell_nodes, weights=local[comp].ravel(), minlength=n)

    # higher-order part: 2γ (S M_lump⁻¹)^{m/2} M y
    if params.gamma != 0.0:
        power = params.order // 2
        y = _operator_power(grid, disp, power)
        My = (standard_mass(grid) @ y.T).T
        grad += 2.0 * params.gamma * _operator_power_adjoint(grid, My, power)

    # matching part: (2/δ) Σ w (U_next∘Φ - U_prev) (∇U_next∘Φ)·Θ
    points, residual = _matching_residual(grid, up, un, disp)
    weights = _channel_weights(params, up.shape[0])
    slopes = grid.interpolate_gradient(un, points)
    force = (2.0 / params.delta) * np.einsum("c,cp,cpd->pd", weights, residual, slopes)
    force *= rule.flat_weights[:, None]
    local = np.einsum("mqn,qa->nma", force.reshape(grid.n_cells, 9, 2), rule.ref_basis)
    for comp in range(2):
        grad[comp] += np.bincount(cell_nodes, weights=local[comp].ravel(), minlength=n)

    grad[:, grid.boundary_mask] = 0.0
    return grad


def deformation_gradient(grid: Grid, u_prev: Image, u_next: Image, phi: Deformation,
                         params: MaterialParams) -> VectorField:
    """
    Gradient of the pair energy with respect to the deformation.

    Returns:
        Nodal representation of the derivative, zero on the boundary
    """
    return VectorField(grid, gradient_values(grid, u_prev, u_next, phi, params))
