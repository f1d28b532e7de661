"""Hyperelastic energy densities W(A) for 2x2 deformation gradients.

All functions are vectorized over leading axes: A has shape (..., 2, 2).
"""

import logging
from typing import Tuple, Union

import numpy as np

from metamorph.energy.params import MaterialParams, ModelKind
from metamorph.utils.errors import InadmissibleStateError

logger = logging.getLogger(__name__)

# det A at or below this counts as orientation-reversing
DET_THRESHOLD = 1e-12

_IDENTITY = np.eye(2)


def _det(A: np.ndarray) -> np.ndarray:
    return A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0]


def _cofactor(A: np.ndarray) -> np.ndarray:
    """Derivative of det A with respect to A."""
    return np.stack([
        np.stack([A[..., 1, 1], -A[..., 1, 0]], axis=-1),
        np.stack([-A[..., 0, 1], A[..., 0, 0]], axis=-1),
    ], axis=-2)


def _scalar_or_array(values: np.ndarray) -> Union[float, np.ndarray]:
    return float(values) if np.ndim(values) == 0 else values


def density_W(A: np.ndarray, params: MaterialParams) -> Union[float, np.ndarray]:
    """
    Evaluate the energy density.

    The Ogden density a1(tr AᵀA)^q + a2(det A)^r + a3(det A)^-s + a4 is
    evaluated as a1((tr AᵀA)^q - 2^q) + a2((det A)^r - 1) + a3((det A)^-s - 1),
    which is the same function since a1·2^q + a2 + a3 + a4 = 0.

    Args:
        A: Matrices of shape (..., 2, 2)
        params: Material parameters

    Returns:
        Density values; +inf where det A <= DET_THRESHOLD (ogden model)
    """
    A = np.asarray(A, dtype=float)
    if params.kind == ModelKind.SIMPLIFIED:
        diff = A - _IDENTITY
        return _scalar_or_array(np.sum(diff * diff, axis=(-2, -1)))

    a1, a2, a3, _ = params.coefficients
    tr = np.sum(A * A, axis=(-2, -1))
    det = _det(A)
    admissible = det > DET_THRESHOLD
    safe_det = np.where(admissible, det, 1.0)
    values = (a1 * (tr ** params.q - 2.0 ** params.q)
              + a2 * (safe_det ** params.r - 1.0)
              + a3 * (safe_det ** (-params.s) - 1.0))
    return _scalar_or_array(np.where(admissible, values, np.inf))


def density_W_derivative(A: np.ndarray, params: MaterialParams) -> np.ndarray:
    """
    Fréchet derivative W_{,A} of the density.

    Args:
        A: Matrices of shape (..., 2, 2)
        params: Material parameters

    Returns:
        Array of the same shape as A
    """
    A = np.asarray(A, dtype=float)
    if params.kind == ModelKind.SIMPLIFIED:
        return 2.0 * (A - _IDENTITY)

    det = _det(A)
    if np.any(det <= DET_THRESHOLD):
        raise InadmissibleStateError(
            f"Deformation gradient with det {float(np.min(det)):.3e} <= {DET_THRESHOLD}"
        )
    a1, a2, a3, _ = params.coefficients
    q, r, s = params.q, params.r, params.s
    tr = np.sum(A * A, axis=(-2, -1))
    trace_part = (2.0 * a1 * q * tr ** (q - 1.0))[..., None, None] * A
    det_part = (a2 * r * det ** (r - 1.0) - a3 * s * det ** (-s - 1.0))[..., None, None] * _cofactor(A)
    return trace_part + det_part


def second_derivative_check(B: np.ndarray, params: MaterialParams, eps: float = 1e-3) -> Tuple[float, float]:
    """
    Compare ½D²W(𝟙)(B,B) with the linearized elastic form.

    Args:
        B: Direction, a 2x2 matrix
        params: Ogden parameters
        eps: Finite-difference step

    Returns:
        (finite-difference value, λ/2 (tr B)² + μ tr((sym B)²))
    """
    B = np.asarray(B, dtype=float)
    f_plus = density_W(_IDENTITY + eps * B, params)
    f_zero = density_W(_IDENTITY, params)
    f_minus = density_W(_IDENTITY - eps * B, params)
    numeric = 0.5 * (f_plus - 2.0 * f_zero + f_minus) / eps ** 2

    sym = 0.5 * (B + B.T)
    analytic = 0.5 * params.lam * np.trace(B) ** 2 + params.mu * np.trace(sym @ sym)
    return float(numeric), float(analytic)
