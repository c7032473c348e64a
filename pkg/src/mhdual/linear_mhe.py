"""Optimal moving-horizon observer for linear systems, driven by the
current output only.

At each step the observer reconciles its internal state z with the fresh
measurement y by minimizing

    J(xi, z, y) = ||C A^{N-1} xi - y||_R^2
                  + sum_{i=0}^{N-2} ||C A^i xi - C A^i z||_R^2

whose unique minimizer eta has a closed form built from the horizon
weights Q (the first N-1 terms of the weighted observability gramian) and
H (the last term).  The observer recursion is z+ = A eta with estimate
xhat = A^{N-1} z; it is algebraically identical to the classic form
xhat+ = A xhat + L (y - C xhat) for the synthesized gain L, whose error
dynamics A - L C are Schur stable whenever the N-step observability stack
has full column rank.

The module also exposes the exact algebraic identities behind that
stability proof as runtime diagnostics: the cost-decomposition identity,
the Lyapunov-style decrement inequality, and the small-cost-to-small-error
threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, SynthesisError
from .linalg import check_spd, solve_spd, spectral_radius, weighted_sq_norm
from .systems import (
    TraceRecord,
    as_matrix,
    as_vector,
    is_full_column_rank,
    observability_stack,
)


@dataclass(frozen=True)
class HorizonWeights:
    """Horizon length N, output weight R, and the derived matrices Q and H.

    Q = sum_{i=0}^{N-2} A^i' C' R C A^i   (empty sum = 0 when N = 1)
    H = A^{N-1}' C' R C A^{N-1}

    Q + H is the full N-term weighted observability gramian and is
    nonsingular under the rank hypothesis.
    """

    N: int
    R: np.ndarray
    Q: np.ndarray
    H: np.ndarray


@dataclass(frozen=True)
class ObserverGainL:
    """Observer gain with the spectral radius of its error dynamics A - L C."""

    L: np.ndarray
    spectral_radius: float


def _validated_pair(A, C) -> tuple[np.ndarray, np.ndarray]:
    A = as_matrix(A, "A")
    C = as_matrix(C, "C")
    if A.shape[0] != A.shape[1]:
        raise ParameterError(f"A must be square, got {A.shape}")
    if C.shape[1] != A.shape[0]:
        raise ParameterError(f"C must have {A.shape[0]} columns, got {C.shape[1]}")
    return A, C


def _output_rows(A: np.ndarray, C: np.ndarray, N: int) -> list[np.ndarray]:
    """Blocks [C, CA, ..., CA^{N-1}] by repeated multiplication."""
    rows = [C]
    for _ in range(N - 1):
        rows.append(rows[-1] @ A)
    return rows


def horizon_weights(A, C, N: int, R) -> HorizonWeights:
    """Build the horizon weights Q, H for an observable window of length N."""
    A, C = _validated_pair(A, C)
    if N < 1:
        raise ParameterError(f"N must be >= 1, got {N}")
    R = check_spd(R, "R")
    if R.shape[0] != C.shape[0]:
        raise ParameterError(
            f"R must be {C.shape[0]}x{C.shape[0]} to match the output dimension"
        )
    W = observability_stack(A, C, N)
    if not is_full_column_rank(W):
        raise SynthesisError(
            f"observability stack with N={N} is rank deficient; cannot synthesize"
        )
    rows = _output_rows(A, C, N)
    n = A.shape[0]
    Q = np.zeros((n, n))
    for CAi in rows[:-1]:
        Q += CAi.T @ R @ CAi
    H = rows[-1].T @ R @ rows[-1]
    return HorizonWeights(N=N, R=R, Q=0.5 * (Q + Q.T), H=0.5 * (H + H.T))


def cost_J(A, C, R, N: int, xi, z, y) -> float:
    """Window cost of a candidate state xi against observer state z and output y."""
    A, C = _validated_pair(A, C)
    R = check_spd(R, "R")
    xi = as_vector(xi, A.shape[0], "xi")
    z = as_vector(z, A.shape[0], "z")
    y = as_vector(y, C.shape[0], "y")
    rows = _output_rows(A, C, N)
    total = weighted_sq_norm(rows[-1] @ xi - y, R)
    for CAi in rows[:-1]:
        total += weighted_sq_norm(CAi @ (xi - z), R)
    return float(total)


def optimal_eta(weights: HorizonWeights, A, C, z, y) -> np.ndarray:
    """Unique minimizer of the window cost, in closed form.

    eta = (Q+H)^{-1} (A^{N-1}' C' R y + Q z)
    """
    A, C = _validated_pair(A, C)
    z = as_vector(z, A.shape[0], "z")
    y = as_vector(y, C.shape[0], "y")
    CA_last = _output_rows(A, C, weights.N)[-1]
    rhs = CA_last.T @ (weights.R @ y) + weights.Q @ z
    return solve_spd(weights.Q + weights.H, rhs, "Q+H")


def observer_gain_L(A, C, N: int, R) -> ObserverGainL:
    """Synthesize the equivalent one-step observer gain.

    L = A^N (Q+H)^{-1} A^{N-1}' C' R, so that xhat+ = A xhat + L (y - C xhat)
    reproduces the selector-based recursion exactly.  The returned spectral
    radius of A - L C is < 1 under the rank hypothesis.
    """
    weights = horizon_weights(A, C, N, R)
    A, C = _validated_pair(A, C)
    AN = np.linalg.matrix_power(A, N)
    CA_last = _output_rows(A, C, N)[-1]
    L = AN @ solve_spd(weights.Q + weights.H, CA_last.T @ weights.R, "Q+H")
    return ObserverGainL(L=L, spectral_radius=spectral_radius(A - L @ C))


def cost_decomposition_residual(weights: HorizonWeights, A, C, z, tx) -> float:
    """Residual of the exact cost/error energy balance at the optimum.

    With tx the N-1 steps earlier plant state and y = C A^{N-1} tx, the
    optimal cost satisfies

        J(eta, z, y) + ||eta - tx||_{Q+H}^2 = ||z - tx||_Q^2

    identically; the returned value is lhs - rhs and should be zero up to
    roundoff.
    """
    A, C = _validated_pair(A, C)
    z = as_vector(z, A.shape[0], "z")
    tx = as_vector(tx, A.shape[0], "tx")
    y = _output_rows(A, C, weights.N)[-1] @ tx
    eta = optimal_eta(weights, A, C, z, y)
    J = cost_J(A, C, weights.R, weights.N, eta, z, y)
    lhs = J + weighted_sq_norm(eta - tx, weights.Q + weights.H)
    rhs = weighted_sq_norm(z - tx, weights.Q)
    return float(lhs - rhs)


def lyapunov_decrement(weights: HorizonWeights, A, C, z, tx) -> tuple[float, float]:
    """Both sides of the per-step decrement inequality.

    lhs = ||z+ - tx+||_Q^2 with z+ = A eta, tx+ = A tx
    rhs = ||z - tx||_Q^2 - J(eta, z, y)

    The inequality lhs <= rhs holds because A' Q A = Q + H - C' R C, and is
    the source of convergence: summing it bounds the total cost.
    """
    A, C = _validated_pair(A, C)
    z = as_vector(z, A.shape[0], "z")
    tx = as_vector(tx, A.shape[0], "tx")
    y = _output_rows(A, C, weights.N)[-1] @ tx
    eta = optimal_eta(weights, A, C, z, y)
    J = cost_J(A, C, weights.R, weights.N, eta, z, y)
    lhs = weighted_sq_norm(A @ (eta - tx), weights.Q)
    rhs = weighted_sq_norm(z - tx, weights.Q) - J
    return float(lhs), float(rhs)


def error_bound_threshold(N: int, W, A, R, eps: float) -> float:
    """Cost level delta guaranteeing estimate error <= eps.

    If the per-step optimal cost stays below the returned delta from some
    step k1 on, the estimation error stays below eps from step k1 + N on:

        delta = 6 lam_min(W'W) lam_min(R) eps^2
                / ((2N^3 + 3N^2 + N) lam_max(A^N' A^N))
    """
    W = as_matrix(W, "W")
    A = as_matrix(A, "A")
    R = check_spd(R, "R")
    lam_min_W = float(np.min(np.linalg.eigvalsh(W.T @ W)))
    lam_min_R = float(np.min(np.linalg.eigvalsh(R)))
    AN = np.linalg.matrix_power(A, N)
    lam_max_A = float(np.max(np.linalg.eigvalsh(AN.T @ AN)))
    coeff = 2 * N**3 + 3 * N**2 + N
    return 6.0 * lam_min_W * lam_min_R * eps**2 / (coeff * lam_max_A)


def run_linear_mhe(A, C, N: int, R, z0, x0, steps: int) -> list[TraceRecord]:
    """Simulate the plant and the moving-horizon observer for `steps` steps.

    Each record carries the per-step cost J; from step N-1 on (once the
    delayed plant state is defined) it also carries the Lyapunov
    inequality sides and the cost-decomposition residual.
    """
    if steps < 1:
        raise ParameterError(f"steps must be >= 1, got {steps}")
    weights = horizon_weights(A, C, N, R)
    A, C = _validated_pair(A, C)
    AN1 = np.linalg.matrix_power(A, N - 1)
    z = as_vector(z0, A.shape[0], "z0")
    x = as_vector(x0, A.shape[0], "x0")

    history = [x.copy()]
    trace: list[TraceRecord] = []
    for k in range(steps + 1):
        y = C @ x
        eta = optimal_eta(weights, A, C, z, y)
        xhat = AN1 @ z
        J = cost_J(A, C, weights.R, N, eta, z, y)
        diag: dict = {}
        if k >= N - 1:
            tx = history[k - N + 1]
            lhs, rhs = lyapunov_decrement(weights, A, C, z, tx)
            diag["lyap_lhs"] = lhs
            diag["lyap_rhs"] = rhs
            diag["identity_residual"] = cost_decomposition_residual(
                weights, A, C, z, tx
            )
        else:
            diag["lyap_lhs"] = float("nan")
            diag["lyap_rhs"] = float("nan")
            diag["identity_residual"] = float("nan")
        trace.append(
            TraceRecord(
                k=k,
                x=x.copy(),
                xhat=xhat,
                err_norm=float(np.linalg.norm(xhat - x)),
                y=y,
                z=z.copy(),
                eta=eta,
                cost=J,
                diagnostics=diag,
            )
        )
        z = A @ eta
        x = A @ x
        history.append(x.copy())
        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(x))):
            from .errors import DivergenceError

            raise DivergenceError(f"observer run diverged at step {k + 1}")
    return trace
