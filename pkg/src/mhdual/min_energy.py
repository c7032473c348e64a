"""Finite-horizon minimum-energy tracking and the estimation/control
duality map.

The tracker steers xhat+ = A xhat + B u toward the autonomous reference
x+ = A x by spending the least weighted input energy that pins the
tracker exactly onto A^N x after N steps:

    min sum_i ||v_i||_{R^{-1}}^2   s.t.  z_0 = xhat,
                                         z_{i+1} = A z_i + B v_i,
                                         z_N = A^N x.

The solution is the gramian-weighted least-norm input sequence; its first
element is the linear feedback v_0 = K (x - xhat), and the optimal value
has the closed quadratic form V = ||xhat - x||^2 weighted by
A^N' G^{-1} A^N where G is the weighted reachability gramian.  Everything
here is the exact transpose of the moving-horizon observer synthesis,
which `dualize` makes explicit.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, SynthesisError
from .linalg import check_spd, solve_spd
from .linear_mhe import observer_gain_L
from .systems import (
    TraceRecord,
    as_matrix,
    as_vector,
    controllability_stack,
    is_full_row_rank,
)


@dataclass(frozen=True)
class WeightedGramian:
    """G = sum_{i=0}^{N-1} A^i B R B' A^i', positive definite under the
    reachability rank hypothesis."""

    G: np.ndarray
    N: int


@dataclass(frozen=True)
class MinEnergySolution:
    """Least-energy input sequence, its state path, cost, and the feedback
    gain whose action reproduces the first input."""

    inputs: np.ndarray  # (N, m)
    states: np.ndarray  # (N+1, n)
    cost: float
    gain_K: np.ndarray  # (m, n)


def _validated_pair(A, B) -> tuple[np.ndarray, np.ndarray]:
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    if A.shape[0] != A.shape[1]:
        raise ParameterError(f"A must be square, got {A.shape}")
    if B.shape[0] != A.shape[0]:
        raise ParameterError(f"B must have {A.shape[0]} rows, got {B.shape[0]}")
    return A, B


def weighted_gramian(A, B, N: int, R) -> WeightedGramian:
    """Accumulate the N-step weighted reachability gramian."""
    A, B = _validated_pair(A, B)
    if N < 1:
        raise ParameterError(f"N must be >= 1, got {N}")
    R = check_spd(R, "R")
    if R.shape[0] != B.shape[1]:
        raise ParameterError(
            f"R must be {B.shape[1]}x{B.shape[1]} to match the input dimension"
        )
    if not is_full_row_rank(controllability_stack(A, B, N)):
        raise SynthesisError(
            f"controllability stack with N={N} is rank deficient; cannot synthesize"
        )
    n = A.shape[0]
    G = np.zeros((n, n))
    AiB = B
    for _ in range(N):
        G += AiB @ R @ AiB.T
        AiB = A @ AiB
    return WeightedGramian(G=0.5 * (G + G.T), N=N)


def kleinman_gain(A, B, N: int, R) -> np.ndarray:
    """Feedback gain K = R B' A^{N-1}' G^{-1} A^N.

    Applying u = K (x - xhat) at every step drives the tracking error to
    zero; A - B K is Schur stable by duality with the observer gain.
    """
    G = weighted_gramian(A, B, N, R).G
    A, B = _validated_pair(A, B)
    R = check_spd(R, "R")
    AN = np.linalg.matrix_power(A, N)
    AN1 = np.linalg.matrix_power(A, N - 1)
    return R @ B.T @ AN1.T @ solve_spd(G, AN, "gramian")


def solve_min_energy(A, B, N: int, R, xhat, x) -> MinEnergySolution:
    """Solve the terminal-constrained least-energy program explicitly.

    The inputs are v_i = R B' A^{N-1-i}' G^{-1} A^N (x - xhat); the state
    path is simulated forward and lands on A^N x exactly (up to roundoff).
    """
    gram = weighted_gramian(A, B, N, R)
    A, B = _validated_pair(A, B)
    R = check_spd(R, "R")
    n, m = B.shape
    xhat = as_vector(xhat, n, "xhat")
    x = as_vector(x, n, "x")
    AN = np.linalg.matrix_power(A, N)
    lam = solve_spd(gram.G, AN @ (x - xhat), "gramian")

    inputs = np.empty((N, m))
    for i in range(N):
        Ai = np.linalg.matrix_power(A, N - 1 - i)
        inputs[i] = R @ B.T @ Ai.T @ lam
    states = np.empty((N + 1, n))
    states[0] = xhat
    for i in range(N):
        states[i + 1] = A @ states[i] + B @ inputs[i]
    if not np.all(np.isfinite(states)):
        raise ParameterError("minimum-energy path contains non-finite values")
    cost = float(sum(v @ solve_spd(R, v, "R") for v in inputs))
    return MinEnergySolution(
        inputs=inputs, states=states, cost=cost, gain_K=kleinman_gain(A, B, N, R)
    )


def optimal_cost_V(A, B, N: int, R, xhat, x) -> float:
    """Closed-form optimal energy V = (xhat-x)' A^N' G^{-1} A^N (xhat-x).

    Positive definite in the error only when A is nonsingular; for
    singular A a warning is issued rather than an error, since the value
    itself remains the correct optimal cost.
    """
    gram = weighted_gramian(A, B, N, R)
    A, B = _validated_pair(A, B)
    n = A.shape[0]
    xhat = as_vector(xhat, n, "xhat")
    x = as_vector(x, n, "x")
    if abs(np.linalg.det(A)) < 1e-12:
        warnings.warn(
            "A is singular: the closed-form cost is not positive definite "
            "in the tracking error",
            stacklevel=2,
        )
    e = np.linalg.matrix_power(A, N) @ (xhat - x)
    return float(e @ solve_spd(gram.G, e, "gramian"))


def run_tracker_linear(A, B, N: int, R, xhat0, x0, steps: int) -> list[TraceRecord]:
    """Simulate reference and tracker under u = K (x - xhat).

    Records the optimal cost V at each visited pair; V is nonincreasing
    along the run and the tracking error converges to zero.
    """
    if steps < 1:
        raise ParameterError(f"steps must be >= 1, got {steps}")
    gram = weighted_gramian(A, B, N, R)
    K = kleinman_gain(A, B, N, R)
    A, B = _validated_pair(A, B)
    n = A.shape[0]
    AN = np.linalg.matrix_power(A, N)
    xhat = as_vector(xhat0, n, "xhat0")
    x = as_vector(x0, n, "x0")

    trace: list[TraceRecord] = []
    for k in range(steps + 1):
        u = K @ (x - xhat)
        e = AN @ (xhat - x)
        V = float(e @ solve_spd(gram.G, e, "gramian"))
        trace.append(
            TraceRecord(
                k=k,
                x=x.copy(),
                xhat=xhat.copy(),
                err_norm=float(np.linalg.norm(xhat - x)),
                u=u.copy(),
                cost=V,
            )
        )
        xhat = A @ xhat + B @ u
        x = A @ x
        if not (np.all(np.isfinite(xhat)) and np.all(np.isfinite(x))):
            from .errors import DivergenceError

            raise DivergenceError(f"tracker run diverged at step {k + 1}")
    return trace


def dualize(A, M, N: int, R, direction: str) -> np.ndarray:
    """Map a synthesis problem across the estimation/control duality.

    direction "control-to-estimation": M is an input map B; returns the
    observer gain of the transposed pair (A', B').  direction
    "estimation-to-control": M is an output map C; returns the feedback
    gain of the transposed pair (A', C').  Either way the returned gain is
    the transpose of its partner's, and applying the map twice returns the
    original gain.
    """
    A = as_matrix(A, "A")
    M = as_matrix(M, "M")
    if direction == "control-to-estimation":
        return observer_gain_L(A.T, M.T, N, R).L
    if direction == "estimation-to-control":
        return kleinman_gain(A.T, M.T, N, R)
    raise ParameterError(
        "direction must be 'control-to-estimation' or 'estimation-to-control'"
    )
