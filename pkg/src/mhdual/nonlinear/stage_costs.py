"""Stage costs: per-step discrepancy functions with class-Kinf envelopes.

A stage cost ell(v, w) is a symmetric, zero-on-the-diagonal discrepancy
sandwiched between two class-Kinf functions of the distance between its
arguments.  Nothing here can certify those properties globally, so they
are spot-checked: monotonicity of the envelopes on a log-spaced grid at
construction, the sandwich itself on sampled pairs via `validate`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import ParameterError
from ..linalg import check_spd

_KINF_GRID = np.logspace(-6, 3, 20)


def check_class_kinf(fn: Callable[[float], float], name: str = "alpha") -> None:
    """Spot-check that fn looks like a class-Kinf function.

    Verifies fn(0) = 0 and strict increase over a 20-point log-spaced grid;
    continuity and unboundedness cannot be checked and are taken on trust.
    """
    v0 = float(fn(0.0))
    if not np.isfinite(v0) or abs(v0) > 1e-12:
        raise ParameterError(f"{name}(0) must be 0, got {v0!r}")
    vals = [float(fn(s)) for s in _KINF_GRID]
    if not all(np.isfinite(v) for v in vals):
        raise ParameterError(f"{name} produced non-finite values")
    if any(b <= a for a, b in zip(vals, vals[1:])) or vals[0] <= v0:
        raise ParameterError(f"{name} is not strictly increasing")


@dataclass(frozen=True)
class StageCost:
    """Evaluable stage cost with optional class-Kinf envelopes.

    ``sqrt_weight`` is set for quadratic costs only; it lets least-squares
    solvers work on smooth residuals instead of the scalar cost.  The
    envelopes may be None when no useful bound exists (e.g. quadratic
    costs with a semidefinite weight, as used by trackers that only
    penalize moves in the input range).
    """

    fn: Callable[[np.ndarray, np.ndarray], float]
    alpha1: Callable[[float], float] | None = None
    alpha2: Callable[[float], float] | None = None
    kind: str = "custom"
    sqrt_weight: np.ndarray | None = None

    def __post_init__(self):
        if self.alpha1 is not None:
            check_class_kinf(self.alpha1, "alpha1")
        if self.alpha2 is not None:
            check_class_kinf(self.alpha2, "alpha2")

    def __call__(self, v, w) -> float:
        return float(self.fn(np.asarray(v, float).ravel(), np.asarray(w, float).ravel()))

    def validate(self, rng: np.random.Generator, dim: int, samples: int = 50) -> None:
        """Spot-check symmetry, zero diagonal, and the envelope sandwich."""
        for _ in range(samples):
            v = rng.uniform(-2.0, 2.0, dim)
            w = rng.uniform(-2.0, 2.0, dim)
            lvw, lwv = self(v, w), self(w, v)
            if not np.isclose(lvw, lwv, rtol=1e-9, atol=1e-12):
                raise ParameterError(f"stage cost is not symmetric at {v}, {w}")
            if abs(self(v, v)) > 1e-12:
                raise ParameterError("stage cost is nonzero on the diagonal")
            rho = float(np.linalg.norm(v - w))
            if self.alpha1 is not None and lvw < self.alpha1(rho) - 1e-9:
                raise ParameterError("stage cost violates its lower envelope")
            if self.alpha2 is not None and lvw > self.alpha2(rho) + 1e-9:
                raise ParameterError("stage cost violates its upper envelope")


def quadratic_cost(W, allow_semidefinite: bool = False) -> StageCost:
    """ell(v, w) = (v-w)' W (v-w) for W symmetric positive (semi)definite.

    With an SPD weight the envelopes are lam_min(W) s^2 and lam_max(W) s^2.
    A semidefinite weight (allowed only on request) gets no lower envelope.
    """
    W = np.atleast_2d(np.asarray(W, dtype=float))
    if allow_semidefinite:
        if not np.allclose(W, W.T, rtol=1e-12, atol=1e-12):
            raise ParameterError("weight must be symmetric")
        W = 0.5 * (W + W.T)
        eigs = np.linalg.eigvalsh(W)
        if eigs[0] < -1e-12:
            raise ParameterError("weight must be positive semidefinite")
    else:
        W = check_spd(W, "weight")
        eigs = np.linalg.eigvalsh(W)
    lam_min, lam_max = float(eigs[0]), float(eigs[-1])
    evals, evecs = np.linalg.eigh(W)
    sqrtW = evecs @ np.diag(np.sqrt(np.clip(evals, 0.0, None))) @ evecs.T
    return StageCost(
        fn=lambda v, w: float((v - w) @ (W @ (v - w))),
        alpha1=(lambda s: lam_min * s * s) if lam_min > 0 else None,
        alpha2=lambda s: lam_max * s * s,
        kind="quad",
        sqrt_weight=sqrtW,
    )


def absolute_cost(dim: int | None = None) -> StageCost:
    """ell(v, w) = sum_i |v_i - w_i|.

    The 1-norm dominates the Euclidean norm, so alpha1 is the identity;
    the upper envelope sqrt(dim) s needs the dimension, so it is omitted
    when dim is unknown.
    """
    root_d = float(np.sqrt(dim)) if dim is not None else None
    return StageCost(
        fn=lambda v, w: float(np.sum(np.abs(v - w))),
        alpha1=lambda s: s,
        alpha2=(lambda s: root_d * s) if root_d is not None else None,
        kind="abs",
    )


def table_cost(points) -> StageCost:
    """Piecewise-linear cost of the Euclidean distance.

    ``points`` is a list of (distance, value) pairs; the first must be
    (0, 0) and values must be strictly increasing.  Beyond the last knot
    the final slope is extrapolated, keeping the function unbounded.
    """
    pts = sorted((float(s), float(v)) for s, v in points)
    if len(pts) < 2:
        raise ParameterError("table cost needs at least two points")
    if pts[0] != (0.0, 0.0):
        raise ParameterError("table cost must start at (0, 0)")
    xs = np.array([p[0] for p in pts])
    ys = np.array([p[1] for p in pts])
    if np.any(np.diff(xs) <= 0) or np.any(np.diff(ys) <= 0):
        raise ParameterError("table cost must be strictly increasing")
    end_slope = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])

    def of_distance(s: float) -> float:
        if s <= xs[-1]:
            return float(np.interp(s, xs, ys))
        return float(ys[-1] + end_slope * (s - xs[-1]))

    return StageCost(
        fn=lambda v, w: of_distance(float(np.linalg.norm(v - w))),
        alpha1=of_distance,
        alpha2=of_distance,
        kind="table",
    )


def make_stage_cost(name: str, dim: int | None = None) -> StageCost:
    """Parse a named stage cost: "abs" or "quad:<weight spec>".

    The quad weight spec is a scalar ("quad:2.5") or a diagonal
    ("quad:diag:1,2").
    """
    if name == "abs":
        return absolute_cost(dim)
    if name.startswith("quad:"):
        spec = name[len("quad:"):]
        if spec.startswith("diag:"):
            entries = [float(s) for s in spec[len("diag:"):].split(",")]
            return quadratic_cost(np.diag(entries))
        return quadratic_cost(np.array([[float(spec)]]) if dim in (None, 1) else float(spec) * np.eye(dim))
    raise ParameterError(f"unknown stage cost {name!r} (expected 'abs' or 'quad:...')")
