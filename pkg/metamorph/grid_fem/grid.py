"""Regular quadrilateral grid and bilinear finite element fields.

Nodes are numbered lexicographically (x fastest), so the nodal vector of an
image is its row-major pixel array flattened. Cells are numbered the same way.
Local node order inside a cell is lower-left, lower-right, upper-left,
upper-right.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Tuple, Union

import numpy as np

from metamorph.utils.errors import InvalidInputError

logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, list, tuple]


@dataclass(frozen=True)
class Grid:
    """Regular grid with one node per pixel on [0,(nx-1)h] x [0,(ny-1)h]."""
    nx: int
    ny: int
    h: float

    @property
    def n_nodes(self) -> int:
        return self.nx * self.ny

    @property
    def n_cells(self) -> int:
        return (self.nx - 1) * (self.ny - 1)

    @property
    def width(self) -> float:
        return (self.nx - 1) * self.h

    @property
    def height(self) -> float:
        return (self.ny - 1) * self.h

    @property
    def area(self) -> float:
        """Area |D| of the domain rectangle."""
        return self.width * self.height

    @cached_property
    def node_coords(self) -> np.ndarray:
        """Node positions, shape (n_nodes, 2)."""
        ix, iy = np.meshgrid(np.arange(self.nx), np.arange(self.ny))
        return np.column_stack([ix.ravel() * self.h, iy.ravel() * self.h])

    @cached_property
    def cell_nodes(self) -> np.ndarray:
        """Global node indices of every cell in local order, shape (n_cells, 4)."""
        cx, cy = np.meshgrid(np.arange(self.nx - 1), np.arange(self.ny - 1))
        n0 = (cy * self.nx + cx).ravel()
        return np.column_stack([n0, n0 + 1, n0 + self.nx, n0 + self.nx + 1])

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        """True for nodes on the domain boundary."""
        ix, iy = np.meshgrid(np.arange(self.nx), np.arange(self.ny))
        mask = (ix == 0) | (iy == 0) | (ix == self.nx - 1) | (iy == self.ny - 1)
        return mask.ravel()

    def clamp(self, points: np.ndarray) -> np.ndarray:
        """Project points componentwise onto the domain rectangle."""
        points = np.asarray(points, dtype=float)
        return np.stack([
            np.clip(points[..., 0], 0.0, self.width),
            np.clip(points[..., 1], 0.0, self.height),
        ], axis=-1)

    def locate(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Find the containing cell and local coordinates of each point.

        Points on shared edges belong to the lower-left cell; points outside
        the domain are clamped first.

        Args:
            points: Array of shape (P, 2)

        Returns:
            Tuple of cell indices (P,), local coordinates s (P,) and t (P,)
        """
        p = self.clamp(np.asarray(points, dtype=float).reshape(-1, 2))
        fx = p[:, 0] / self.h
        fy = p[:, 1] / self.h
        cx = np.clip(np.ceil(fx) - 1, 0, self.nx - 2).astype(np.int64)
        cy = np.clip(np.ceil(fy) - 1, 0, self.ny - 2).astype(np.int64)
        s = np.clip(fx - cx, 0.0, 1.0)
        t = np.clip(fy - cy, 0.0, 1.0)
        return cy * (self.nx - 1) + cx, s, t

    def basis_at(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Global node indices (P, 4) and basis values (P, 4) at points."""
        cells, s, t = self.locate(points)
        return self.cell_nodes[cells], bilinear_basis(s, t)

    def basis_gradient_at(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Global node indices (P, 4) and basis gradients (P, 4, 2) at points."""
        cells, s, t = self.locate(points)
        return self.cell_nodes[cells], bilinear_basis_gradient(s, t) / self.h

    def interpolate(self, values: np.ndarray, points: np.ndarray) -> np.ndarray:
        """
        Evaluate nodal fields at arbitrary points.

        Args:
            values: Nodal values, shape (C, n_nodes)
            points: Array of shape (P, 2)

        Returns:
            Values of shape (C, P)
        """
        nodes, weights = self.basis_at(points)
        return np.einsum("cpa,pa->cp", values[:, nodes], weights)

    def interpolate_gradient(self, values: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Gradients of nodal fields at points, shape (C, P, 2)."""
        nodes, grads = self.basis_gradient_at(points)
        return np.einsum("cpa,pad->cpd", values[:, nodes], grads)

    def to_pixels(self, values: np.ndarray) -> np.ndarray:
        """Reshape nodal values (C, n_nodes) to an image array (ny, nx, C)."""
        return np.moveaxis(values.reshape(-1, self.ny, self.nx), 0, -1)

    def from_pixels(self, pixels: np.ndarray) -> np.ndarray:
        """Reshape an image array (ny, nx) or (ny, nx, C) to nodal values (C, n_nodes)."""
        pixels = np.asarray(pixels, dtype=float)
        if pixels.ndim == 2:
            pixels = pixels[..., None]
        if pixels.shape[:2] != (self.ny, self.nx):
            raise InvalidInputError(
                f"Image of shape {pixels.shape[:2]} does not match grid {self.ny}x{self.nx}"
            )
        return np.moveaxis(pixels, -1, 0).reshape(pixels.shape[-1], -1)


def bilinear_basis(s: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Values of the four local basis functions at local coordinates."""
    return np.stack([(1 - s) * (1 - t), s * (1 - t), (1 - s) * t, s * t], axis=-1)


def bilinear_basis_gradient(s: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Local-coordinate gradients of the four basis functions, shape (..., 4, 2)."""
    ds = np.stack([-(1 - t), 1 - t, -t, t], axis=-1)
    dt = np.stack([-(1 - s), -s, 1 - s, s], axis=-1)
    return np.stack([ds, dt], axis=-1)


def make_grid(width_px: int, height_px: int) -> Grid:
    """
    Create the grid for an image of the given pixel dimensions.

    Args:
        width_px: Number of pixels per row (nodes along x)
        height_px: Number of rows (nodes along y)

    Returns:
        Grid with h = 1/(max(width_px, height_px) - 1)
    """
    if width_px < 2 or height_px < 2:
        raise InvalidInputError(f"Grid needs at least 2x2 nodes, got {width_px}x{height_px}")
    h = 1.0 / (max(width_px, height_px) - 1)
    return Grid(nx=int(width_px), ny=int(height_px), h=h)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Bilinear finite element function with one or more channels."""
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[None, :]
        if values.ndim != 2 or values.shape[1] != self.grid.n_nodes:
            raise InvalidInputError(
                f"Field values of shape {values.shape} do not fit {self.grid.n_nodes} nodes"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("Field values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def channels(self) -> int:
        return self.values.shape[0]

    @classmethod
    def from_pixels(cls, grid: Grid, pixels: np.ndarray) -> "ScalarField":
        return cls(grid, grid.from_pixels(pixels))

    def to_pixels(self) -> np.ndarray:
        return self.grid.to_pixels(self.values)


@dataclass(frozen=True, eq=False)
class VectorField:
    """Deformation Φ stored as its nodal displacement Φ - 𝟙."""
    grid: Grid
    displacement: np.ndarray = field(repr=False)

    def __post_init__(self):
        disp = np.array(self.displacement, dtype=float)
        if disp.shape != (2, self.grid.n_nodes):
            raise InvalidInputError(
                f"Displacement of shape {disp.shape} does not fit {self.grid.n_nodes} nodes"
            )
        if np.any(disp[:, self.grid.boundary_mask] != 0.0):
            raise InvalidInputError("Deformation must equal the identity on the boundary")
        disp.setflags(write=False)
        object.__setattr__(self, "displacement", disp)

    @classmethod
    def identity(cls, grid: Grid) -> "VectorField":
        return cls(grid, np.zeros((2, grid.n_nodes)))

    def __call__(self, points: np.ndarray) -> np.ndarray:
        """Evaluate Φ at points (P, 2); arguments and results are clamped to the domain."""
        p = self.grid.clamp(np.asarray(points, dtype=float).reshape(-1, 2))
        return self.grid.clamp(p + self.grid.interpolate(self.displacement, p).T)


def image_values(u: Union[ScalarField, np.ndarray]) -> np.ndarray:
    """Nodal values (C, n_nodes) of a field or raw array."""
    if isinstance(u, ScalarField):
        return u.values
    values = np.asarray(u, dtype=float)
    return values[None, :] if values.ndim == 1 else values


def displacement_values(phi: Optional[Union[VectorField, np.ndarray]], grid: Grid) -> np.ndarray:
    """Nodal displacement (2, n_nodes); None stands for the identity."""
    if phi is None:
        return np.zeros((2, grid.n_nodes))
    if isinstance(phi, VectorField):
        return phi.displacement
    return np.asarray(phi, dtype=float)


def eval_field(u: ScalarField, p: ArrayLike) -> Union[float, np.ndarray]:
    """
    Evaluate a field at one or more points.

    Args:
        u: The field
        p: A point (2,) or points (P, 2)

    Returns:
        float for a single-channel field at one point, otherwise an array with
        the channel axis first (dropped for one channel) and the point axis last
    """
    points = np.asarray(p, dtype=float)
    result = u.grid.interpolate(image_values(u), points.reshape(-1, 2))
    if points.ndim == 1:
        result = result[:, 0]
    if u.channels == 1:
        result = result[0]
    return float(result) if np.ndim(result) == 0 else result


def eval_gradient(u: ScalarField, p: ArrayLike) -> np.ndarray:
    """
    Gradient of a field at one or more points.

    Returns:
        Array (2,) for a single-channel field at one point, otherwise
        (C, P, 2) with singleton axes dropped the same way as eval_field
    """
    points = np.asarray(p, dtype=float)
    result = u.grid.interpolate_gradient(image_values(u), points.reshape(-1, 2))
    if points.ndim == 1:
        result = result[:, 0]
    if u.channels == 1:
        result = result[0]
    return result


def pixel_sigma(grid: Grid, sigma2: float) -> float:
    """Convert a variance in domain units to a standard deviation in pixels."""
    return math.sqrt(max(sigma2, 0.0)) / grid.h
