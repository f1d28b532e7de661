"""Discrete paths of images and deformations."""

import logging
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from metamorph.energy import EnergyBreakdown, MaterialParams, path_energy
from metamorph.grid_fem import Grid, ScalarField, VectorField
from metamorph.utils.errors import InvalidInputError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EnergyRecord:
    """Path energy after one half-step of the alternation."""
    level: int
    sweep: int
    stage: str  # "initial", "registration" or "images"
    breakdown: EnergyBreakdown

    @property
    def energy(self) -> float:
        return self.breakdown.scaled_total


@dataclass
class DiscretePath:
    """
    Images U_0..U_K and deformations Φ_1..Φ_K at one level of the cascade.

    Attributes:
        grid: The grid shared by all images
        level: Level j with K = 2^j
        images: Nodal values, shape (K+1, C, n_nodes)
        displacements: Nodal displacements of Φ_k, shape (K, 2, n_nodes)
        history: Energy records accumulated over all levels
        level_images: Converged images of every finished level
    """
    grid: Grid
    level: int
    images: np.ndarray
    displacements: np.ndarray
    history: List[EnergyRecord] = field(default_factory=list)
    level_images: Dict[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=float)
        self.displacements = np.asarray(self.displacements, dtype=float)
        if self.images.ndim != 3 or self.images.shape[2] != self.grid.n_nodes:
            raise InvalidInputError(f"Path images of shape {self.images.shape} do not fit the grid")
        if self.displacements.shape != (self.images.shape[0] - 1, 2, self.grid.n_nodes):
            raise InvalidInputError(
                f"{self.images.shape[0]} images need {self.images.shape[0] - 1} deformations, "
                f"got displacements of shape {self.displacements.shape}"
            )

    @property
    def K(self) -> int:
        return self.displacements.shape[0]

    @property
    def channels(self) -> int:
        return self.images.shape[1]

    def image(self, k: int) -> ScalarField:
        if not 0 <= k <= self.K:
            raise InvalidInputError(f"Image index {k} outside 0..{self.K}")
        return ScalarField(self.grid, self.images[k])

    def deformation(self, k: int) -> VectorField:
        """Φ_k for k = 1..K."""
        if not 1 <= k <= self.K:
            raise InvalidInputError(f"Deformation index {k} outside 1..{self.K}")
        return VectorField(self.grid, self.displacements[k - 1])

    def energy(self, params: MaterialParams) -> EnergyBreakdown:
        return path_energy(self.grid, list(self.images), list(self.displacements), params)

    def record(self, sweep: int, stage: str, params: MaterialParams) -> EnergyRecord:
        """Evaluate the path energy and append it to the history."""
        entry = EnergyRecord(self.level, sweep, stage, self.energy(params))
        self.history.append(entry)
        return entry

    def final_records(self) -> List[EnergyRecord]:
        """Records of this path's level taken after initialization or an image solve."""
        return [r for r in self.history if r.level == self.level and r.stage in ("initial", "images")]
