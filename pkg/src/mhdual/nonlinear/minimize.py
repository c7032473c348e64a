"""Inner minimizers for the horizon costs: grid seeding plus local polish.

The horizon costs may be nonconvex, so the default strategy lays a coarse
grid over a box, keeps the best few points as starts, and polishes each
with damped Gauss-Newton (when a residual stack is available) or
Nelder-Mead (otherwise).  Every evaluation is tracked, so the returned
point is never worse than anything probed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize as scipy_minimize

from ..errors import ParameterError

GRID_DIM_LIMIT = 3  # full mesh only at desk scale; sampled seeding beyond


@dataclass(frozen=True)
class Minimizer:
    """Search strategy descriptor.

    strategy "auto" resolves to grid seeding plus Gauss-Newton when the
    objective exposes residuals, grid plus Nelder-Mead otherwise.  The box
    bounds the seeding grid only; polish steps may leave it.  Above
    GRID_DIM_LIMIT dimensions the mesh is replaced by seeded uniform
    samples inside the box.
    """

    box_lo: np.ndarray = field(default_factory=lambda: np.array([-3.0]))
    box_hi: np.ndarray = field(default_factory=lambda: np.array([3.0]))
    strategy: str = "auto"
    grid_points: int = 17
    n_starts: int = 5
    grad_tol: float = 1e-8
    max_iter: int = 80
    fd_step: float = 1e-6
    sample_count: int = 500
    seed: int = 0
    tie_rtol: float = 1e-6
    tie_distance: float = 1e-3

    def resolved_box(self, dim: int) -> tuple[np.ndarray, np.ndarray]:
        lo = np.asarray(self.box_lo, float).ravel()
        hi = np.asarray(self.box_hi, float).ravel()
        if lo.size == 1:
            lo = np.full(dim, lo[0])
        if hi.size == 1:
            hi = np.full(dim, hi[0])
        if lo.size != dim or hi.size != dim:
            raise ParameterError(f"minimizer box does not match dimension {dim}")
        if np.any(lo >= hi):
            raise ParameterError("minimizer box is empty")
        return lo, hi


@dataclass
class MinimizeResult:
    x: np.ndarray
    fun: float
    degraded: bool = False
    ambiguous: bool = False
    n_evaluations: int = 0


class _Tracked:
    """Objective wrapper that remembers the best point ever evaluated."""

    def __init__(self, objective: Callable[[np.ndarray], float]):
        self.objective = objective
        self.best_x: np.ndarray | None = None
        self.best_f = np.inf
        self.count = 0

    def __call__(self, x: np.ndarray) -> float:
        self.count += 1
        try:
            f = float(self.objective(np.asarray(x, float)))
        except FloatingPointError:
            return np.inf
        if not np.isfinite(f):
            return np.inf
        if f < self.best_f:
            self.best_f = f
            self.best_x = np.array(x, float)
        return f


def _grid_seeds(minimizer: Minimizer, dim: int) -> list[np.ndarray]:
    lo, hi = minimizer.resolved_box(dim)
    if dim <= GRID_DIM_LIMIT:
        axes = [np.linspace(lo[j], hi[j], minimizer.grid_points) for j in range(dim)]
        return [np.array(pt) for pt in itertools.product(*axes)]
    rng = np.random.default_rng(minimizer.seed)
    return [rng.uniform(lo, hi) for _ in range(minimizer.sample_count)]


def _fd_jacobian(residual, x: np.ndarray, r0: np.ndarray, step: float) -> np.ndarray:
    h = step * (1.0 + float(np.linalg.norm(x)))
    J = np.empty((r0.shape[0], x.shape[0]))
    for j in range(x.shape[0]):
        pert = x.copy()
        pert[j] += h
        J[:, j] = (np.asarray(residual(pert), float) - r0) / h
    return J


def _gauss_newton(
    residual: Callable[[np.ndarray], np.ndarray],
    tracked: _Tracked,
    x0: np.ndarray,
    minimizer: Minimizer,
) -> tuple[np.ndarray, bool]:
    """Damped Gauss-Newton on the residual stack; returns (point, converged)."""
    x = np.asarray(x0, float).copy()
    r = np.asarray(residual(x), float)
    if not np.all(np.isfinite(r)):
        return x, False
    tracked(x)
    for _ in range(minimizer.max_iter):
        J = _fd_jacobian(residual, x, r, minimizer.fd_step)
        if not np.all(np.isfinite(J)):
            return x, False
        grad = 2.0 * J.T @ r
        if np.linalg.norm(grad) <= minimizer.grad_tol:
            return x, True
        step, *_ = np.linalg.lstsq(J, -r, rcond=None)
        if not np.all(np.isfinite(step)):
            return x, False
        sq = float(r @ r)
        t = 1.0
        advanced = False
        for _ in range(40):
            cand = x + t * step
            rc = np.asarray(residual(cand), float)
            if np.all(np.isfinite(rc)) and float(rc @ rc) < sq:
                x, r = cand, rc
                tracked(x)
                advanced = True
                break
            t *= 0.5
        if not advanced:
            # stationary up to line-search resolution; treat as converged
            return x, True
    return x, False


def minimize_cost(
    objective: Callable[[np.ndarray], float],
    dim: int,
    minimizer: Minimizer | None = None,
    residual: Callable[[np.ndarray], np.ndarray] | None = None,
    seeds: Sequence[np.ndarray] = (),
) -> MinimizeResult:
    """Minimize a scalar objective over R^dim.

    ``seeds`` are extra warm starts (evaluated and eligible for polish)
    on top of the grid.  Near-ties between distinct polished minima are
    reported through ``ambiguous``; failure to meet the gradient
    tolerance on any polish path is reported through ``degraded``.
    """
    minimizer = minimizer or Minimizer()
    tracked = _Tracked(objective)

    candidates = [np.asarray(s, float).ravel() for s in seeds]
    for c in candidates:
        if c.shape[0] != dim:
            raise ParameterError(f"seed has dimension {c.shape[0]}, expected {dim}")
    strategy = minimizer.strategy
    if strategy == "auto":
        strategy = "grid+gauss_newton" if residual is not None else "grid+nelder_mead"
    use_grid = strategy.startswith("grid")
    polish = strategy.split("+", 1)[1] if "+" in strategy else (
        "" if strategy == "grid" else strategy
    )

    grid = _grid_seeds(minimizer, dim) if use_grid else []
    scored = sorted(((tracked(g), tuple(g)) for g in grid), key=lambda t: t[0])
    starts = candidates + [np.array(g) for _, g in scored[: minimizer.n_starts]]
    if not starts:
        raise ParameterError("no starts available: provide seeds or enable the grid")

    local_minima: list[tuple[np.ndarray, float]] = []
    degraded = False
    for s in starts:
        if polish == "gauss_newton":
            if residual is None:
                raise ParameterError("gauss_newton polish needs a residual stack")
            x, ok = _gauss_newton(residual, tracked, s, minimizer)
            degraded = degraded or not ok
            local_minima.append((x, tracked(x)))
        elif polish == "nelder_mead":
            res = scipy_minimize(
                tracked,
                s,
                method="Nelder-Mead",
                options={
                    "xatol": 1e-10,
                    "fatol": 1e-14,
                    "maxiter": 400 * dim,
                    "maxfev": 400 * dim * 4,
                },
            )
            degraded = degraded or not res.success
            local_minima.append((np.asarray(res.x, float), float(res.fun)))
        else:
            local_minima.append((s, tracked(s)))

    if tracked.best_x is None:
        raise ParameterError("objective was never finite on any probed point")

    best_x, best_f = tracked.best_x, tracked.best_f
    ambiguous = False
    for x, f in local_minima:
        near_in_value = f <= best_f + minimizer.tie_rtol * (1.0 + abs(best_f))
        far_in_state = float(np.linalg.norm(x - best_x)) > minimizer.tie_distance
        if near_in_value and far_in_state:
            ambiguous = True
            break

    return MinimizeResult(
        x=best_x,
        fun=best_f,
        degraded=degraded,
        ambiguous=ambiguous,
        n_evaluations=tracked.count,
    )
