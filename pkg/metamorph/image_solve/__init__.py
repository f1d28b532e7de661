"""Optimal intermediate images for fixed deformations."""

from metamorph.image_solve.pcg import CGOptions, pcg
from metamorph.image_solve.system import (
    BlockTridiagonal,
    assemble_system,
    solve_images,
    pointwise_image_formula,
)
