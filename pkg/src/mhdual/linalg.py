"""Small dense linear-algebra helpers shared by the synthesis modules."""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import ParameterError, SynthesisError


def solve_spd(M: np.ndarray, rhs: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Solve M x = rhs for symmetric positive-definite M.

    Tries a Cholesky factorization first; if that fails numerically
    (near-singular or slightly indefinite M) falls back to a pivoted LU
    solve.  Raises SynthesisError when the matrix is singular outright.
    """
    M = 0.5 * (M + M.T)
    try:
        c, low = scipy.linalg.cho_factor(M, check_finite=False)
        return scipy.linalg.cho_solve((c, low), rhs, check_finite=False)
    except scipy.linalg.LinAlgError:
        pass
    try:
        return scipy.linalg.solve(M, rhs, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise SynthesisError(f"{name} is singular") from exc


def spectral_radius(M: np.ndarray) -> float:
    """Largest eigenvalue modulus of a dense square matrix."""
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def check_spd(R, name: str = "R") -> np.ndarray:
    """Validate a symmetric positive-definite weight and return it as 2-D."""
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if R.shape[0] != R.shape[1]:
        raise ParameterError(f"{name} must be square, got {R.shape}")
    if not np.allclose(R, R.T, rtol=1e-12, atol=1e-12):
        raise ParameterError(f"{name} must be symmetric")
    if np.min(np.linalg.eigvalsh(R)) <= 0:
        raise ParameterError(f"{name} must be positive definite")
    return 0.5 * (R + R.T)


def weighted_sq_norm(v: np.ndarray, W: np.ndarray) -> float:
    """Quadratic form v' W v."""
    return float(v @ (W @ v))
