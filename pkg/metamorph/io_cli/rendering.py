"""Diagnostic renderings: motion color wheel, material derivative maps, energy tables."""

import logging
from pathlib import Path
from typing import List, Sequence, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
from matplotlib.colors import hsv_to_rgb

from metamorph.energy import EnergyBreakdown
from metamorph.geodesic import DiscretePath
from metamorph.grid_fem import Grid

logger = logging.getLogger(__name__)

ENERGY_COLUMNS = [
    "sweep", "k", "density_term", "higher_order_term", "matching_term", "pair_total", "K_times_total",
]


def max_motion(displacements: np.ndarray, K: int) -> float:
    """Largest magnitude of K(Φ_k − 𝟙) over all k and nodes."""
    if displacements.size == 0:
        return 0.0
    return float(K * np.max(np.hypot(displacements[:, 0], displacements[:, 1])))


def motion_image(grid: Grid, disp: np.ndarray, K: int, max_magnitude: float) -> np.ndarray:
    """
    Color-wheel rendering of the motion field K(Φ − 𝟙).

    Hue encodes the direction, saturation the magnitude relative to
    max_magnitude; zero motion is white.

    Returns:
        RGB values in [0, 1], shape (ny, nx, 3)
    """
    v = K * disp
    hue = (np.arctan2(v[1], v[0]) / (2.0 * np.pi)) % 1.0
    magnitude = np.hypot(v[0], v[1])
    saturation = magnitude / max_magnitude if max_magnitude > 0 else np.zeros_like(magnitude)
    hsv = np.stack([hue, np.clip(saturation, 0.0, 1.0), np.ones_like(hue)])
    return hsv_to_rgb(grid.to_pixels(hsv))


def material_derivative_images(fields: Sequence[np.ndarray]) -> List[np.ndarray]:
    """Map Z_1..Z_K to [0, 1] with one symmetric scaling shared by all of them."""
    scale = max((float(np.max(np.abs(z))) for z in fields), default=0.0)
    if scale == 0.0:
        return [np.full_like(z, 0.5) for z in fields]
    return [0.5 + 0.5 * z / scale for z in fields]


def energy_table(path: DiscretePath) -> pd.DataFrame:
    """One row per sweep and time step of the finest level."""
    rows = []
    for entry in path.final_records():
        breakdown: EnergyBreakdown = entry.breakdown
        for k, segment in enumerate(breakdown.segments, start=1):
            rows.append({
                "sweep": entry.sweep,
                "k": k,
                "density_term": segment.density,
                "higher_order_term": segment.higher_order,
                "matching_term": segment.matching,
                "pair_total": segment.total,
                "K_times_total": breakdown.scaled_total,
            })
    return pd.DataFrame(rows, columns=ENERGY_COLUMNS)


def write_energy_csv(path: DiscretePath, target: Union[str, Path]) -> Path:
    target = Path(target)
    energy_table(path).to_csv(target, index=False, lineterminator="\n", encoding="utf-8")
    return target


def plot_energy_contributions(breakdown: EnergyBreakdown, target: Union[str, Path]) -> Path:
    """Bar plot of the K-scaled regularization and matching energy of every segment."""
    target = Path(target)
    K = breakdown.K
    ks = np.arange(1, K + 1)
    regularization = np.array([K * (s.density + s.higher_order) for s in breakdown.segments])
    matching = np.array([K * s.matching for s in breakdown.segments])

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(ks, regularization, label="regularization")
    ax.bar(ks, matching, bottom=regularization, label="matching")
    ax.set_xlabel("time step k")
    ax.set_ylabel("K · segment energy")
    ax.set_xticks(ks)
    ax.legend()
    fig.tight_layout()
    fig.savefig(target, metadata={"Software": None})
    plt.close(fig)
    logger.debug(f"Wrote energy plot {target}")
    return target
