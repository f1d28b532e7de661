"""Deformation energies of the metamorphosis model.

Material densities (full Ogden-type and simplified thin-plate), the discrete
pair energy, the path energy and the gradient with respect to a deformation.
"""

from metamorph.energy.params import MaterialParams, ModelKind, ogden_coeffs
from metamorph.energy.density import density_W, density_W_derivative, second_derivative_check
from metamorph.energy.functional import (
    SegmentEnergy,
    EnergyBreakdown,
    higher_order_energy,
    pair_energy,
    path_energy,
    deformation_gradient,
    gradient_values,
)
