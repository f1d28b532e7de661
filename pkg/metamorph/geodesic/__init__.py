"""Discrete geodesics by cascadic alternating minimization.

The path energy is minimized alternately over the deformations (independent
registrations) and the interior images (one linear solve), with the number of
time steps doubled from level to level.
"""

from metamorph.geodesic.config import SolverConfig
from metamorph.geodesic.path import DiscretePath, EnergyRecord
from metamorph.geodesic.smoothing import presmooth, gaussian_kernel
from metamorph.geodesic.cascade import (
    warp_midpoint,
    midpoint_values,
    register_pairs,
    prolongate,
    alternate,
    run_cascadic,
)
from metamorph.geodesic.diagnostics import (
    transport_path,
    accumulated_material_derivative,
    invert_transport,
    time_interpolate,
)
