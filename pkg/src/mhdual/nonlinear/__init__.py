"""Nonlinear moving-horizon observer and tracker with pluggable inner solvers."""

from .minimize import Minimizer, MinimizeResult, minimize_cost
from .observer import (
    DecayReport,
    EtaResult,
    ObservabilityReport,
    SampleSpec,
    check_J_decay,
    check_uniform_observability,
    nl_cost_J,
    nl_optimal_eta,
    run_nl_observer,
)
from .stage_costs import StageCost, absolute_cost, quadratic_cost, table_cost
from .tracker import TrackerProgram, TrackerSolution, run_nl_tracker, tracker_solve

__all__ = [
    "Minimizer",
    "MinimizeResult",
    "minimize_cost",
    "StageCost",
    "absolute_cost",
    "quadratic_cost",
    "table_cost",
    "EtaResult",
    "SampleSpec",
    "ObservabilityReport",
    "DecayReport",
    "nl_cost_J",
    "nl_optimal_eta",
    "run_nl_observer",
    "check_uniform_observability",
    "check_J_decay",
    "TrackerProgram",
    "TrackerSolution",
    "tracker_solve",
    "run_nl_tracker",
]
