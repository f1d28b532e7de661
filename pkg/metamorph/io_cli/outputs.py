"""Writing a finished run to disk and reading it back."""

import logging
from pathlib import Path
from typing import List, Optional

import numpy as np

from metamorph.geodesic import DiscretePath, accumulated_material_derivative, time_interpolate
from metamorph.grid_fem import Grid, ScalarField
from metamorph.io_cli.config import RunConfig
from metamorph.io_cli.deformation_file import read_deformation, write_deformation
from metamorph.io_cli.images import image_suffix, load_image, save_image, to_uint8, write_raster
from metamorph.io_cli.rendering import (
    material_derivative_images,
    max_motion,
    motion_image,
    plot_energy_contributions,
    write_energy_csv,
)
from metamorph.utils.errors import ImageFileError

logger = logging.getLogger(__name__)


def _ensure_dir(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ImageFileError(f"Cannot create output directory {path}: {exc}") from exc
    return path


def _save_channels(directory: Path, k: int, grid: Grid, values: np.ndarray, image_channels: int) -> None:
    """Save u_<k> and, when a segmentation channel follows the image channels, seg_<k>."""
    save_image(directory / f"u_{k}{image_suffix(image_channels)}", ScalarField(grid, values[:image_channels]))
    if values.shape[0] > image_channels:
        save_image(directory / f"seg_{k}.pgm", ScalarField(grid, values[image_channels:image_channels + 1]))


def render_frames(path: DiscretePath, count: int, out_dir: Path, image_channels: int,
                  inversion_tol: float = 1e-10, inversion_maxiter: int = 50) -> List[Path]:
    """
    Write count frames at equidistant times t_i = i/(count−1).

    Returns:
        Paths of the written image frames
    """
    frames_dir = _ensure_dir(Path(out_dir))
    written = []
    for i in range(count):
        t = i / (count - 1) if count > 1 else 0.0
        frame = time_interpolate(path, t, inversion_tol, inversion_maxiter)
        target = frames_dir / f"t_{i}{image_suffix(image_channels)}"
        save_image(target, ScalarField(path.grid, frame.values[:image_channels]))
        written.append(target)
    logger.info(f"Wrote {count} frames to {frames_dir}")
    return written


def save_outputs(path: DiscretePath, config: RunConfig, out_dir: Optional[Path] = None) -> Path:
    """
    Write all artifacts of a finished run.

    Layout of the output directory:
        level_<j>/u_<k>      images of every level (plus seg_<k> with a segmentation channel)
        phi_<k>.mfd          deformations of the finest level
        motion_<k>.ppm       color-wheel images of K(Φ_k − 𝟙)
        z_<l>                accumulated material derivatives, one shared scaling
        energy.csv           energy of every sweep and time step
        energy.png           energy contributions of the final path
        run.json             effective configuration
        raw/                 float64 dumps (with dump_raw)
        frames/t_<i>         interpolated frames (with frames > 0)

    Args:
        path: The finest path
        config: Effective run configuration
        out_dir: Target directory (config.out if omitted)

    Returns:
        The output directory
    """
    out = _ensure_dir(Path(out_dir or config.out))
    grid, K = path.grid, path.K
    channels = config.image_channels

    for level, images in sorted(path.level_images.items()):
        level_dir = _ensure_dir(out / f"level_{level}")
        for k, values in enumerate(images):
            _save_channels(level_dir, k, grid, values, channels)

    peak = max_motion(path.displacements, K)
    for k in range(1, K + 1):
        phi = path.deformation(k)
        write_deformation(out / f"phi_{k}.mfd", phi)
        write_raster(out / f"motion_{k}.ppm", to_uint8(motion_image(grid, phi.displacement, K, peak)))

    z_fields = [accumulated_material_derivative(path, l).values[:channels] for l in range(1, K + 1)]
    for l, values in enumerate(material_derivative_images(z_fields), start=1):
        save_image(out / f"z_{l}{image_suffix(channels)}", ScalarField(grid, values))

    write_energy_csv(path, out / "energy.csv")
    plot_energy_contributions(path.energy(config.solver.material), out / "energy.png")
    (out / "run.json").write_text(config.model_dump_json(indent=2) + "\n", encoding="utf-8")

    if config.dump_raw:
        raw = _ensure_dir(out / "raw")
        np.save(raw / "images.npy", path.images)
        np.save(raw / "displacements.npy", path.displacements)

    if config.frames:
        render_frames(path, config.frames, out / "frames", channels)

    logger.info(f"Wrote outputs of level {path.level} (K={K}) to {out}")
    return out


def load_run_config(run_dir: Path) -> RunConfig:
    text = (Path(run_dir) / "run.json").read_text(encoding="utf-8")
    return RunConfig.model_validate_json(text, context={"skip_path_check": True})


def load_saved_path(run_dir: Path) -> DiscretePath:
    """
    Rebuild the finest path of a saved run.

    Raw float dumps are used when present; otherwise the 8-bit images and the
    deformation files are read back.
    """
    run_dir = Path(run_dir)
    config = load_run_config(run_dir)
    level = config.solver.levels
    raw = run_dir / "raw"

    if (raw / "images.npy").is_file() and (raw / "displacements.npy").is_file():
        images = np.load(raw / "images.npy")
        displacements = np.load(raw / "displacements.npy")
        grid = read_deformation(run_dir / "phi_1.mfd").grid
        return DiscretePath(grid, level, images, displacements)

    K = 2 ** level
    level_dir = run_dir / f"level_{level}"
    suffix = image_suffix(config.image_channels)
    fields = [load_image(level_dir / f"u_{k}{suffix}", config.mode) for k in range(K + 1)]
    grid = fields[0].grid
    images = []
    for k, field in enumerate(fields):
        values = field.values
        seg = level_dir / f"seg_{k}.pgm"
        if config.has_segmentation and seg.is_file():
            values = np.concatenate([values, load_image(seg, "gray", grid).values])
        images.append(values)
    displacements = [read_deformation(run_dir / f"phi_{k}.mfd", grid).displacement for k in range(1, K + 1)]
    logger.info(f"Rebuilt level {level} path from 8-bit images in {run_dir}")
    return DiscretePath(grid, level, np.stack(images), np.stack(displacements))
