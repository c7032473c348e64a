"""Deadbeat observer/tracker gains and the stacked-equation deadbeat observer.

The linear gains place every closed-loop eigenvalue at the origin, so the
error dies in exactly n steps.  The nonlinear observer reaches the same
behavior by solving, at each step, the stack of output equations

    h(f^i(eta)) = h(f^i(z))   for i = 0 .. N-2
    h(f^{N-1}(eta)) = y

for the selector eta, then advancing z+ = f(eta) and reading the estimate
off as xhat = f^{N-1}(z).  Exact recovery after N steps requires the stack
to be uniquely solvable for the plant at hand (a property declared per
system, verified here only through residuals).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import (
    NotControllableError,
    NotObservableError,
    ParameterError,
    SelectorFailureError,
)
from .systems import (
    NonlinearSystem,
    TraceRecord,
    as_matrix,
    as_vector,
    controllability_stack,
    is_full_column_rank,
    is_full_row_rank,
    observability_stack,
)


@dataclass(frozen=True)
class DeadbeatGain:
    """A deadbeat gain matrix together with the horizon (= order) it uses."""

    gain: np.ndarray
    horizon: int


def deadbeat_observer_gain(A, C) -> DeadbeatGain:
    """Observer gain L = A^n O^{-1} e_n for a scalar-output observable pair.

    O is the n-row observability stack.  All eigenvalues of A - L C land at
    the origin (up to roundoff in the inverse).
    """
    A = as_matrix(A, "A")
    C = as_matrix(C, "C")
    n = A.shape[0]
    if C.shape[0] != 1:
        raise ParameterError("closed-form deadbeat observer gain needs scalar output")
    O = observability_stack(A, C, n)
    if not is_full_column_rank(O):
        raise NotObservableError("observability matrix is singular")
    e_n = np.zeros(n)
    e_n[-1] = 1.0
    An = np.linalg.matrix_power(A, n)
    L = An @ np.linalg.solve(O, e_n)
    return DeadbeatGain(gain=L.reshape(n, 1), horizon=n)


def deadbeat_tracker_gain(A, B) -> DeadbeatGain:
    """Feedback gain K = e_n' Ctrb^{-1} A^n for a scalar-input controllable pair.

    Dual of the observer gain: K(A, B) = deadbeat_observer_gain(A', B')'.
    """
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    n = A.shape[0]
    if B.shape[1] != 1:
        raise ParameterError("closed-form deadbeat tracker gain needs scalar input")
    Ctrb = controllability_stack(A, B, n)
    if not is_full_row_rank(Ctrb):
        raise NotControllableError("controllability matrix is singular")
    e_n = np.zeros(n)
    e_n[-1] = 1.0
    An = np.linalg.matrix_power(A, n)
    K = np.linalg.solve(Ctrb.T, e_n) @ An
    return DeadbeatGain(gain=K.reshape(1, n), horizon=n)


@dataclass(frozen=True)
class EquationStackSolver:
    """Root-finding strategy for the N stacked output equations.

    method:
        "auto"          exact linear solve when the plant is a wrapped
                        linear system, damped Newton otherwise
        "exact-linear"  direct solve of W eta = targets (linear plants only)
        "newton"        damped Newton with a finite-difference Jacobian,
                        warm-started at z
        "custom"        user closed form; result is still residual-checked
    """

    method: str = "auto"
    tol: float = 1e-10
    max_iter: int = 100
    fd_step: float = 1e-6
    custom: Callable[..., np.ndarray] | None = None


def _stack_targets(sys: NonlinearSystem, N: int, z: np.ndarray, y: np.ndarray) -> np.ndarray:
    targets = []
    xi = z
    for _ in range(N - 1):
        targets.append(sys.output(xi))
        xi = sys.step(xi)
    targets.append(y)
    return np.concatenate(targets)


def _stack_outputs(sys: NonlinearSystem, N: int, eta: np.ndarray) -> np.ndarray:
    outs = []
    xi = eta
    for i in range(N):
        outs.append(sys.output(xi))
        if i < N - 1:
            xi = sys.step(xi)
    return np.concatenate(outs)


def _newton_solve(residual, eta0: np.ndarray, tol: float, max_iter: int, fd_step: float) -> np.ndarray:
    eta = eta0.astype(float).copy()
    r = residual(eta)
    best_norm = float(np.linalg.norm(r, np.inf))
    for _ in range(max_iter):
        rnorm = float(np.linalg.norm(r, np.inf))
        if rnorm <= tol:
            return eta
        h = fd_step * (1.0 + float(np.linalg.norm(eta)))
        J = np.empty((r.shape[0], eta.shape[0]))
        for j in range(eta.shape[0]):
            pert = eta.copy()
            pert[j] += h
            J[:, j] = (residual(pert) - r) / h
        step, *_ = np.linalg.lstsq(J, -r, rcond=None)
        if not np.all(np.isfinite(step)):
            break
        t = 1.0
        advanced = False
        for _ in range(40):
            cand = eta + t * step
            rc = residual(cand)
            if np.all(np.isfinite(rc)) and np.linalg.norm(rc, np.inf) < rnorm:
                eta, r = cand, rc
                advanced = True
                break
            t *= 0.5
        if not advanced:
            break
        best_norm = min(best_norm, float(np.linalg.norm(r, np.inf)))
    if float(np.linalg.norm(r, np.inf)) <= tol:
        return eta
    raise SelectorFailureError(
        f"stacked output equations not solved to tol={tol:g}", best_residual=best_norm
    )


def deadbeat_select_eta(
    sys: NonlinearSystem,
    N: int,
    z,
    y,
    solver: EquationStackSolver | None = None,
) -> np.ndarray:
    """Solve the N stacked output equations for the selector eta.

    The stack matches eta's predicted outputs to those of the current
    observer state z for the first N-1 steps and to the fresh measurement
    y at step N-1.  Unique solvability is a declared property of the
    plant; this routine enforces it only through the residual tolerance.
    """
    if N < 1:
        raise ParameterError(f"N must be >= 1, got {N}")
    solver = solver or EquationStackSolver()
    z = as_vector(z, sys.state_dim, "z")
    y = as_vector(y, sys.output_dim, "y")
    targets = _stack_targets(sys, N, z, y)

    method = solver.method
    if method == "auto":
        method = "exact-linear" if sys.linear is not None else "newton"

    if method == "custom":
        if solver.custom is None:
            raise ParameterError("custom solver selected but no callable supplied")
        eta = as_vector(solver.custom(sys, N, z, y), sys.state_dim, "eta")
    elif method == "exact-linear":
        lin = sys.linear
        if lin is None or lin.C is None:
            raise ParameterError("exact-linear solver needs a wrapped linear system")
        W = observability_stack(lin.A, lin.C, N)
        eta, *_ = np.linalg.lstsq(W, targets, rcond=None)
    elif method == "newton":
        eta = _newton_solve(
            lambda xi: _stack_outputs(sys, N, xi) - targets,
            z,
            solver.tol,
            solver.max_iter,
            solver.fd_step,
        )
    else:
        raise ParameterError(f"unknown solver method {solver.method!r}")

    resid = float(np.linalg.norm(_stack_outputs(sys, N, eta) - targets, np.inf))
    if resid > solver.tol * (1.0 + float(np.linalg.norm(targets, np.inf))):
        raise SelectorFailureError(
            f"selector residual {resid:.3e} above tolerance", best_residual=resid
        )
    return eta


def run_deadbeat_observer(
    sys: NonlinearSystem,
    N: int,
    z0,
    plant_x0,
    steps: int,
    solver: EquationStackSolver | None = None,
) -> list[TraceRecord]:
    """Simulate plant and deadbeat observer for `steps` steps.

    Observer recursion: eta from the stacked solve, z+ = f(eta), estimate
    xhat = f^{N-1}(z).  After N steps the estimate matches the plant state
    exactly (within solver tolerance).
    """
    if steps < N:
        raise ParameterError(f"steps must be >= N={N}, got {steps}")
    z = as_vector(z0, sys.state_dim, "z0")
    x = as_vector(plant_x0, sys.state_dim, "plant_x0")
    trace: list[TraceRecord] = []
    for k in range(steps + 1):
        y = sys.output(x)
        xhat = sys.step_n(z, N - 1)
        eta = deadbeat_select_eta(sys, N, z, y, solver)
        trace.append(
            TraceRecord(
                k=k,
                x=x.copy(),
                xhat=xhat,
                err_norm=float(np.linalg.norm(xhat - x)),
                y=y,
                z=z.copy(),
                eta=eta.copy(),
            )
        )
        z = sys.step(eta)
        x = sys.step(x)
        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(x))):
            from .errors import DivergenceError

            raise DivergenceError(f"deadbeat observer run diverged at step {k + 1}")
    return trace
