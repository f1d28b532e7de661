"""Binary deformation files.

Layout: the magic bytes "MFD1", nx and ny as little-endian uint32, then nx·ny
little-endian float64 x-displacements in row-major node order, then the same
for the y-displacements.
"""

import logging
from pathlib import Path
from typing import Optional, Union

import numpy as np

from metamorph.grid_fem import Grid, VectorField, make_grid
from metamorph.utils.errors import DeformationFileError, InvalidInputError

logger = logging.getLogger(__name__)

MAGIC = b"MFD1"
HEADER_SIZE = len(MAGIC) + 8


def encode_deformation(phi: VectorField) -> bytes:
    grid = phi.grid
    header = MAGIC + np.array([grid.nx, grid.ny], dtype="<u4").tobytes()
    return header + np.ascontiguousarray(phi.displacement, dtype="<f8").tobytes()


def decode_deformation(data: bytes, grid: Optional[Grid] = None) -> VectorField:
    """
    Parse a deformation file.

    Args:
        data: File contents
        grid: Grid to attach; built from nx, ny if omitted

    Returns:
        The deformation
    """
    if len(data) < HEADER_SIZE or data[:4] != MAGIC:
        raise DeformationFileError("Not a deformation file (bad magic)")
    nx, ny = (int(v) for v in np.frombuffer(data[4:HEADER_SIZE], dtype="<u4"))
    expected = HEADER_SIZE + 16 * nx * ny
    if len(data) != expected:
        raise DeformationFileError(f"Deformation file for {nx}x{ny} needs {expected} bytes, got {len(data)}")

    if grid is None:
        try:
            grid = make_grid(nx, ny)
        except InvalidInputError as exc:
            raise DeformationFileError(str(exc)) from exc
    elif (grid.nx, grid.ny) != (nx, ny):
        raise DeformationFileError(f"Deformation is {nx}x{ny}, grid is {grid.nx}x{grid.ny}")

    disp = np.frombuffer(data[HEADER_SIZE:], dtype="<f8").reshape(2, nx * ny).astype(float)
    try:
        return VectorField(grid, disp)
    except InvalidInputError as exc:
        raise DeformationFileError(str(exc)) from exc


def write_deformation(path: Union[str, Path], phi: VectorField) -> Path:
    path = Path(path)
    path.write_bytes(encode_deformation(phi))
    logger.debug(f"Wrote deformation {path}")
    return path


def read_deformation(path: Union[str, Path], grid: Optional[Grid] = None) -> VectorField:
    return decode_deformation(Path(path).read_bytes(), grid)
