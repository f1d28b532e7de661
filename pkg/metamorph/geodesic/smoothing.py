"""Gaussian pre-filtering of the input images."""

import logging
import math

import numpy as np
from scipy.ndimage import convolve1d

from metamorph.grid_fem import ScalarField
from metamorph.grid_fem.grid import pixel_sigma
from metamorph.utils.errors import InvalidInputError

logger = logging.getLogger(__name__)


def gaussian_kernel(sigma_px: float) -> np.ndarray:
    """Normalized Gaussian truncated at radius ⌈3σ⌉ pixels."""
    radius = int(math.ceil(3.0 * sigma_px))
    offsets = np.arange(-radius, radius + 1, dtype=float)
    kernel = np.exp(-0.5 * (offsets / sigma_px) ** 2)
    return kernel / kernel.sum()


def presmooth(image: ScalarField, sigma2: float) -> ScalarField:
    """
    Convolve every channel with a separable Gaussian of variance σ².

    Args:
        image: Input field
        sigma2: Variance in domain units; 0 leaves the image unchanged

    Returns:
        The filtered field on the same grid
    """
    if sigma2 < 0:
        raise InvalidInputError(f"Smoothing variance must be non-negative, got {sigma2}")
    sigma_px = pixel_sigma(image.grid, sigma2)
    if sigma_px == 0.0:
        return ScalarField(image.grid, image.values.copy())

    kernel = gaussian_kernel(sigma_px)
    pixels = image.to_pixels()
    pixels = convolve1d(pixels, kernel, axis=0, mode="nearest")
    pixels = convolve1d(pixels, kernel, axis=1, mode="nearest")
    logger.debug(f"Pre-smoothed {image.channels} channel(s), sigma {sigma_px:.3f} px, kernel {kernel.size}")
    return ScalarField.from_pixels(image.grid, pixels)
