"""Synthetic fields shared by the test modules."""

import numpy as np

from metamorph.grid_fem import Grid
from metamorph.io_cli.validate import FULL_MODEL, smooth_displacement, smooth_image

sine_displacement = smooth_displacement
wave_image = smooth_image

__all__ = ["FULL_MODEL", "sine_displacement", "wave_image", "disk_image", "bump_image"]


def disk_image(grid: Grid, center_x: float, radius: float) -> np.ndarray:
    x, y = grid.node_coords[:, 0], grid.node_coords[:, 1]
    inside = (x - center_x) ** 2 + (y - grid.height / 2) ** 2 <= radius ** 2
    return inside.astype(float)[None, :]


def bump_image(grid: Grid, center_x: float, width: float) -> np.ndarray:
    x, y = grid.node_coords[:, 0], grid.node_coords[:, 1]
    return np.exp(-((x - center_x) ** 2 + (y - grid.height / 2) ** 2) / (2 * width ** 2))[None, :]
