"""Reading and writing raster images as finite element fields."""

import logging
from enum import Enum
from pathlib import Path
from typing import Optional, Union

import imageio.v2 as imageio
import numpy as np

from metamorph.grid_fem import Grid, ScalarField, make_grid
from metamorph.utils.errors import ImageFileError, InvalidInputError

logger = logging.getLogger(__name__)

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


class ChannelMode(str, Enum):
    """How input rasters are mapped to channels."""
    GRAY = "gray"
    RGB = "rgb"

    @property
    def channels(self) -> int:
        return 1 if self == ChannelMode.GRAY else 3


def _normalize(pixels: np.ndarray) -> np.ndarray:
    if np.issubdtype(pixels.dtype, np.integer):
        return pixels.astype(float) / np.iinfo(pixels.dtype).max
    return pixels.astype(float)


def load_image(path: Union[str, Path], mode: ChannelMode = ChannelMode.GRAY,
               grid: Optional[Grid] = None) -> ScalarField:
    """
    Load an 8-bit raster as a field with intensities in [0, 1].

    Args:
        path: Image file (PGM/PPM or any format Pillow reads)
        mode: Convert to one gray channel or three color channels
        grid: Expected grid; built from the image size if omitted

    Returns:
        Field with one node per pixel
    """
    try:
        pixels = _normalize(np.asarray(imageio.imread(path)))
    except (OSError, ValueError) as exc:
        raise ImageFileError(f"Cannot read image {path}: {exc}") from exc

    if pixels.ndim == 3:
        # drop alpha
        pixels = pixels[..., :1] if pixels.shape[2] in (1, 2) else pixels[..., :3]
        if pixels.shape[2] == 1:
            pixels = pixels[..., 0]

    mode = ChannelMode(mode)
    if mode == ChannelMode.GRAY and pixels.ndim == 3:
        pixels = pixels @ LUMA_WEIGHTS
    elif mode == ChannelMode.RGB and pixels.ndim == 2:
        pixels = np.repeat(pixels[..., None], 3, axis=2)

    height, width = pixels.shape[:2]
    if grid is None:
        grid = make_grid(width, height)
    elif (grid.nx, grid.ny) != (width, height):
        raise InvalidInputError(f"Image {path} is {width}x{height}, expected {grid.nx}x{grid.ny}")
    return ScalarField.from_pixels(grid, pixels)


def to_uint8(pixels: np.ndarray) -> np.ndarray:
    """Quantize intensities to 8 bits, rounding to nearest; single channels become 2-D."""
    quantized = np.round(np.clip(pixels, 0.0, 1.0) * 255.0).astype(np.uint8)
    if quantized.ndim == 3 and quantized.shape[2] == 1:
        quantized = quantized[..., 0]
    return quantized


def image_suffix(channels: int) -> str:
    return ".pgm" if channels == 1 else ".ppm"


def write_raster(path: Union[str, Path], pixels: np.ndarray) -> Path:
    """Write an (ny, nx) or (ny, nx, 3) uint8 array."""
    path = Path(path)
    try:
        imageio.imwrite(path, pixels)
    except (OSError, ValueError) as exc:
        raise ImageFileError(f"Cannot write image {path}: {exc}") from exc
    logger.debug(f"Wrote {path}")
    return path


def save_image(path: Union[str, Path], image: ScalarField) -> Path:
    """
    Save a one- or three-channel field as an 8-bit raster.

    Args:
        path: Target file; the suffix selects the format
        image: Field with intensities in [0, 1] (values outside are clipped)

    Returns:
        The written path
    """
    if image.channels not in (1, 3):
        raise InvalidInputError(f"Cannot save a {image.channels}-channel image as a raster")
    return write_raster(path, to_uint8(image.to_pixels()))
