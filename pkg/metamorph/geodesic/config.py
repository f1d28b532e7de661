"""Solver configuration of the cascadic scheme."""

import logging
import os
from typing import Optional

from pydantic import BaseModel, Field

from metamorph.energy import MaterialParams
from metamorph.grid_fem import Grid
from metamorph.image_solve import CGOptions
from metamorph.registration import RegistrationOptions

logger = logging.getLogger(__name__)


def _default_workers() -> int:
    return max(1, int(os.getenv("METAMORPH_WORKERS", "1")))


class SolverConfig(BaseModel):
    """Everything the cascadic solver needs besides the two input images."""
    levels: int = Field(3, ge=1, description="finest level J, K = 2^J")
    threshold: float = Field(1e-6, gt=0.0, description="stop when the interior images change less than this")
    sigma2: Optional[float] = Field(None, ge=0.0, description="pre-smoothing variance; 5/4 h (color) or 5/8 h (gray)")
    max_sweeps: int = Field(100, gt=0)
    workers: int = Field(default_factory=_default_workers, ge=1)
    material: MaterialParams = Field(default_factory=MaterialParams)
    registration: RegistrationOptions = Field(default_factory=RegistrationOptions)
    cg: CGOptions = Field(default_factory=CGOptions)

    def smoothing_variance(self, grid: Grid, channels: int) -> float:
        """Variance σ² used to pre-filter the inputs."""
        if self.sigma2 is not None:
            return self.sigma2
        return (1.25 if channels >= 3 else 0.625) * grid.h
