"""System descriptions, trajectory iteration, and stacked rank diagnostics.

Linear systems are plain matrix triples (A, B, C).  Nonlinear systems are
pairs of evaluable maps (state map f, output map h); controlled systems add
a transition F(x, u) with an input set and the reference map they track.
All states and outputs are 1-D float arrays; matrices are 2-D.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionError, DivergenceError, ParameterError

DEFAULT_RANK_RTOL = 1e-10


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-D float array."""
    A = np.atleast_2d(np.asarray(M, dtype=float))
    if A.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got ndim={A.ndim}")
    if not np.all(np.isfinite(A)):
        raise ParameterError(f"{name} contains non-finite entries")
    return A


def as_vector(x, dim: int | None = None, name: str = "vector") -> np.ndarray:
    """Coerce to a finite 1-D float array, optionally checking its length."""
    v = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
    if dim is not None and v.shape[0] != dim:
        raise DimensionError(f"{name} must have length {dim}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise ParameterError(f"{name} contains non-finite entries")
    return v


@dataclass(frozen=True)
class LinearSystem:
    """Discrete-time linear system x+ = A x (+ B u), y = C x.

    B and C are optional: an autonomous plant has no B, a tracker design
    needs no C.  Dimensions are validated once at construction; instances
    are immutable and safe to share.
    """

    A: np.ndarray
    B: np.ndarray | None = None
    C: np.ndarray | None = None

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        if A.shape[0] != A.shape[1]:
            raise DimensionError(f"A must be square, got {A.shape}")
        object.__setattr__(self, "A", A)
        n = A.shape[0]
        if self.B is not None:
            B = as_matrix(self.B, "B")
            if B.shape[0] != n:
                raise DimensionError(f"B must have {n} rows, got {B.shape[0]}")
            object.__setattr__(self, "B", B)
        if self.C is not None:
            C = as_matrix(self.C, "C")
            if C.shape[1] != n:
                raise DimensionError(f"C must have {n} columns, got {C.shape[1]}")
            object.__setattr__(self, "C", C)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return 0 if self.B is None else self.B.shape[1]

    @property
    def p(self) -> int:
        return 0 if self.C is None else self.C.shape[0]

    def step(self, x) -> np.ndarray:
        return self.A @ as_vector(x, self.n, "x")

    def output(self, x) -> np.ndarray:
        if self.C is None:
            raise DimensionError("system has no output matrix C")
        return self.C @ as_vector(x, self.n, "x")


@dataclass(frozen=True)
class NonlinearSystem:
    """Autonomous plant x+ = f(x) with output y = h(x).

    f and h must be deterministic and must not mutate their argument; the
    wrapper always hands them a private copy.  ``linear`` carries the
    originating LinearSystem when this is a wrapped linear plant so exact
    linear solvers can be used on the stacked output equations.
    """

    f: Callable[[np.ndarray], np.ndarray]
    h: Callable[[np.ndarray], np.ndarray]
    state_dim: int
    output_dim: int
    name: str = ""
    linear: LinearSystem | None = None

    def step(self, x) -> np.ndarray:
        x = as_vector(x, self.state_dim, "x")
        return as_vector(self.f(x.copy()), self.state_dim, "f(x)")

    def output(self, x) -> np.ndarray:
        x = as_vector(x, self.state_dim, "x")
        return as_vector(self.h(x.copy()), self.output_dim, "h(x)")

    def step_n(self, x, k: int) -> np.ndarray:
        """k-fold composition of the state map."""
        x = as_vector(x, self.state_dim, "x")
        for _ in range(k):
            x = self.step(x)
        return x

    @classmethod
    def from_linear(cls, sys: LinearSystem, name: str = "linear") -> "NonlinearSystem":
        if sys.C is None:
            raise DimensionError("wrapping a linear plant as an observer target needs C")
        return cls(
            f=lambda x: sys.A @ x,
            h=lambda x: sys.C @ x,
            state_dim=sys.n,
            output_dim=sys.p,
            name=name,
            linear=sys,
        )


class FiniteInputSet:
    """Explicit finite list of admissible inputs, kept in sorted order.

    Sorting (lexicographic on components) fixes the enumeration order of
    exhaustive searches, which is what makes their tie-breaking
    deterministic.
    """

    def __init__(self, inputs: Sequence):
        vecs = [as_vector(u, name="input") for u in inputs]
        if not vecs:
            raise ParameterError("input set must be nonempty")
        dim = vecs[0].shape[0]
        for v in vecs:
            if v.shape[0] != dim:
                raise DimensionError("inputs have inconsistent dimensions")
        self.inputs = sorted(vecs, key=tuple)
        self.dim = dim

    def __len__(self) -> int:
        return len(self.inputs)

    def __iter__(self):
        return iter(self.inputs)


class BoxInputSet:
    """Axis-aligned box of admissible inputs, lo <= u <= hi componentwise."""

    def __init__(self, lo, hi):
        self.lo = as_vector(lo, name="lo")
        self.hi = as_vector(hi, name="hi")
        if self.lo.shape != self.hi.shape:
            raise DimensionError("box bounds have different dimensions")
        if np.any(self.lo > self.hi):
            raise ParameterError("box lower bound exceeds upper bound")
        self.dim = self.lo.shape[0]

    def clip(self, u: np.ndarray) -> np.ndarray:
        return np.clip(u, self.lo, self.hi)

    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)


@dataclass(frozen=True)
class ControlledSystem:
    """Tracker plant x+ = F(x, u) with input set U and reference map f.

    The reference map is the autonomous dynamics of the system being
    tracked; the standing requirement is that the reference successor
    f(x) is reachable, f(x) in F(x, U).  ``check_reference_feasible``
    verifies this at a given state within a tolerance.
    """

    transition: Callable[[np.ndarray, np.ndarray], np.ndarray]
    input_set: FiniteInputSet | BoxInputSet
    reference_map: Callable[[np.ndarray], np.ndarray]
    state_dim: int
    name: str = ""
    equilibrium: np.ndarray | None = None

    def step(self, x, u) -> np.ndarray:
        x = as_vector(x, self.state_dim, "x")
        u = as_vector(u, self.input_set.dim, "u")
        return as_vector(self.transition(x.copy(), u.copy()), self.state_dim, "F(x,u)")

    def reference_step(self, x) -> np.ndarray:
        x = as_vector(x, self.state_dim, "x")
        return as_vector(self.reference_map(x.copy()), self.state_dim, "f(x)")

    def reference_step_n(self, x, k: int) -> np.ndarray:
        x = as_vector(x, self.state_dim, "x")
        for _ in range(k):
            x = self.reference_step(x)
        return x

    def check_reference_feasible(self, x, tol: float = 1e-8) -> bool:
        """True if some admissible input reproduces the reference successor at x."""
        target = self.reference_step(x)
        if isinstance(self.input_set, FiniteInputSet):
            best = min(
                float(np.linalg.norm(self.step(x, u) - target)) for u in self.input_set
            )
            return best <= tol
        from scipy.optimize import minimize

        box = self.input_set
        res = minimize(
            lambda u: float(np.linalg.norm(self.step(x, box.clip(u)) - target)),
            box.center(),
            method="Nelder-Mead",
            options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 2000},
        )
        return float(res.fun) <= tol


@dataclass
class TraceRecord:
    """One simulation step: plant state, estimates, and scalar diagnostics.

    ``cost`` holds J (observers) or V (trackers).  ``diagnostics`` carries
    mode-specific extras such as Lyapunov inequality sides or feasibility
    flags; entries absent at a step are simply not present.
    """

    k: int
    x: np.ndarray
    xhat: np.ndarray
    err_norm: float
    y: np.ndarray | None = None
    z: np.ndarray | None = None
    eta: np.ndarray | None = None
    u: np.ndarray | None = None
    cost: float | None = None
    diagnostics: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Stacked matrices and rank tests
# ---------------------------------------------------------------------------

def observability_stack(A, C, N: int) -> np.ndarray:
    """Rows [C; CA; ...; CA^{N-1}] stacked top to bottom."""
    A = as_matrix(A, "A")
    C = as_matrix(C, "C")
    if A.shape[0] != A.shape[1]:
        raise DimensionError(f"A must be square, got {A.shape}")
    if C.shape[1] != A.shape[0]:
        raise DimensionError(f"C must have {A.shape[0]} columns, got {C.shape[1]}")
    if N < 1:
        raise ParameterError(f"N must be >= 1, got {N}")
    blocks = []
    CAi = C
    for _ in range(N):
        blocks.append(CAi)
        CAi = CAi @ A
    return np.vstack(blocks)


def controllability_stack(A, B, N: int) -> np.ndarray:
    """Columns [B, AB, ..., A^{N-1}B] left to right."""
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    if A.shape[0] != A.shape[1]:
        raise DimensionError(f"A must be square, got {A.shape}")
    if B.shape[0] != A.shape[0]:
        raise DimensionError(f"B must have {A.shape[0]} rows, got {B.shape[0]}")
    if N < 1:
        raise ParameterError(f"N must be >= 1, got {N}")
    blocks = []
    AiB = B
    for _ in range(N):
        blocks.append(AiB)
        AiB = A @ AiB
    return np.hstack(blocks)


def is_full_row_rank(M, rel_tol: float = DEFAULT_RANK_RTOL) -> bool:
    """Full row rank test via singular values with a relative tolerance.

    True iff the matrix has at most as many rows as columns and its
    smallest singular value exceeds rel_tol times its largest.  For
    column-rank queries pass the transpose (or use is_full_column_rank).
    """
    M = as_matrix(M, "M")
    if M.size == 0:
        raise DimensionError("rank test on an empty matrix")
    if rel_tol < 0:
        raise ParameterError("rel_tol must be nonnegative")
    if M.shape[0] > M.shape[1]:
        return False
    s = np.linalg.svd(M, compute_uv=False)
    return bool(s[-1] > rel_tol * s[0])


def is_full_column_rank(M, rel_tol: float = DEFAULT_RANK_RTOL) -> bool:
    return is_full_row_rank(np.asarray(M, dtype=float).T, rel_tol)


def iterate_autonomous(sys, x0, steps: int) -> list[np.ndarray]:
    """Trajectory [x0, f(x0), ..., f^steps(x0)] of an autonomous system.

    Raises DivergenceError as soon as a non-finite state appears.
    """
    if steps < 0:
        raise ParameterError(f"steps must be >= 0, got {steps}")
    step = sys.step
    n = sys.n if isinstance(sys, LinearSystem) else sys.state_dim
    x = as_vector(x0, n, "x0")
    traj = [x]
    for k in range(steps):
        x = np.asarray(step(x), dtype=float).ravel()
        if not np.all(np.isfinite(x)):
            raise DivergenceError(f"trajectory diverged at step {k + 1}")
        traj.append(x)
    return traj


# ---------------------------------------------------------------------------
# Built-in nonlinear plants
# ---------------------------------------------------------------------------

def _make_cubic_output(params: dict) -> NonlinearSystem:
    a = float(params.get("a", 0.9))
    return NonlinearSystem(
        f=lambda x: a * x,
        h=lambda x: x**3,
        state_dim=1,
        output_dim=1,
        name="cubic_output",
    )


def _make_rotation_saturated(params: dict) -> NonlinearSystem:
    theta = float(params.get("theta", 0.7))
    rho = float(params.get("rho", 0.9))
    if math.isclose(math.sin(theta), 0.0, abs_tol=1e-12):
        raise ParameterError("rotation_saturated needs sin(theta) != 0")
    R = np.array(
        [[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]]
    )
    return NonlinearSystem(
        f=lambda x: np.tanh(rho * (R @ x)),
        h=lambda x: x[:1],
        state_dim=2,
        output_dim=1,
        name="rotation_saturated",
    )


NONLINEAR_REGISTRY: dict[str, Callable[[dict], NonlinearSystem]] = {
    "cubic_output": _make_cubic_output,
    "rotation_saturated": _make_rotation_saturated,
}


def make_nonlinear_system(name: str, params: dict | None = None) -> NonlinearSystem:
    """Instantiate a registered nonlinear plant by name."""
    if name not in NONLINEAR_REGISTRY:
        known = ", ".join(sorted(NONLINEAR_REGISTRY))
        raise ParameterError(f"unknown nonlinear system {name!r} (known: {known})")
    return NONLINEAR_REGISTRY[name](params or {})


def make_integer_walk(inputs: Sequence[float] = (-1.0, 0.0, 1.0)) -> ControlledSystem:
    """Scalar random-walk tracker: F(z, u) = z + u over a finite input list.

    The reference is the identity map, so every point is an equilibrium to
    regulate toward.
    """
    return ControlledSystem(
        transition=lambda x, u: x + u,
        input_set=FiniteInputSet([[float(u)] for u in inputs]),
        reference_map=lambda x: x,
        state_dim=1,
        name="integer_walk",
    )
