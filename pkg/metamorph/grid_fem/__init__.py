"""Bilinear finite elements on a regular grid.

This module houses the grid and field types, point evaluation, the Simpson
quadrature and the assembly of (warped) mass and stiffness matrices.
"""

from metamorph.grid_fem.grid import (
    Grid,
    ScalarField,
    VectorField,
    make_grid,
    eval_field,
    eval_gradient,
    image_values,
    displacement_values,
)
from metamorph.grid_fem.quadrature import QuadRule, simpson_rule, quad_integrate
from metamorph.grid_fem.assembly import (
    assemble_warped_mass,
    assemble_stiffness,
    standard_mass,
    stiffness,
    lumped_mass,
)
