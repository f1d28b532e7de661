"""Conjugate gradients with diagonal (Jacobi) preconditioning."""

import logging
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field
from scipy import sparse

from metamorph.utils.errors import ConvergenceError

logger = logging.getLogger(__name__)


class CGOptions(BaseModel):
    """Stopping rule of the linear solver."""
    tol: float = Field(1e-8, gt=0.0, description="relative residual ‖r‖/‖b‖")
    maxiter: Optional[int] = Field(None, gt=0, description="defaults to 1000·K")


def pcg(A: sparse.spmatrix, b: np.ndarray, diag: np.ndarray, x0: Optional[np.ndarray] = None,
        tol: float = 1e-8, maxiter: int = 1000) -> Tuple[np.ndarray, int, float]:
    """
    Solve A x = b for symmetric positive definite A.

    Args:
        A: System matrix
        b: Right-hand side
        diag: Preconditioner diagonal (usually the diagonal of A)
        x0: Initial guess (zero if omitted)
        tol: Relative residual tolerance
        maxiter: Iteration budget

    Returns:
        Tuple (solution, iterations, final relative residual)
    """
    b_norm = np.linalg.norm(b)
    if b_norm == 0.0:
        return np.zeros_like(b), 0, 0.0

    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    z = r / diag
    p = z.copy()
    rz = float(r @ z)

    for k in range(maxiter + 1):
        residual = np.linalg.norm(r) / b_norm
        if residual <= tol:
            logger.debug(f"CG converged in {k} iterations, residual {residual:.3e}")
            return x, k, residual
        if k == maxiter:
            break
        Ap = A @ p
        alpha = rz / float(p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        z = r / diag
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new

    raise ConvergenceError("Conjugate gradients did not converge", residual, maxiter)
