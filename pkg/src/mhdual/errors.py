"""Exception hierarchy shared by all mhdual modules.

Every failure the CLI maps to an exit code has a dedicated class here so
that callers can branch on type instead of parsing messages.
"""

from __future__ import annotations


class MhdualError(Exception):
    """Base class for all package errors."""


class DimensionError(MhdualError):
    """Matrix or vector dimensions are inconsistent."""


class ParameterError(MhdualError):
    """A numeric parameter violates its contract (e.g. non-SPD weight)."""


class SynthesisError(MhdualError):
    """Gain synthesis failed, typically a rank-condition violation."""


class NotObservableError(SynthesisError):
    """Observability stack is rank deficient."""


class NotControllableError(SynthesisError):
    """Controllability stack is rank deficient."""


class SolverFailureError(MhdualError):
    """An iterative solver exhausted its budget without converging.

    Carries the best residual seen so the caller can judge how close
    the solve got.
    """

    def __init__(self, message: str, best_residual: float | None = None):
        super().__init__(message)
        self.best_residual = best_residual


class SelectorFailureError(SolverFailureError):
    """The per-step selector equations could not be solved."""


class InfeasibleError(MhdualError):
    """A terminal equality constraint cannot be met.

    ``summary`` describes what was reachable (best terminal distance,
    number of sequences probed) to aid diagnosis.
    """

    def __init__(self, message: str, summary: dict | None = None):
        super().__init__(message)
        self.summary = summary or {}


class DivergenceError(MhdualError):
    """A simulated trajectory produced non-finite values."""


class ConfigError(MhdualError):
    """An experiment configuration is invalid.

    ``violations`` is a list of {"field": ..., "message": ...} entries,
    one per problem found, so a single pass reports everything.
    """

    def __init__(self, violations: list[dict]):
        self.violations = violations
        lines = "; ".join(f"{v['field']}: {v['message']}" for v in violations)
        super().__init__(f"invalid configuration: {lines}")
