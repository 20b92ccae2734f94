"""Scenario assembly, LP builders and schedule handling."""

from .builder import (
    FEASIBILITY,
    MAX_WEGR,
    MIN_DELAY,
    OBJECTIVES,
    POLICIES,
    build,
    build_feasibility_h1,
    build_feasibility_inf,
    build_feasibility_multih,
    build_for,
    build_max_wegr,
    build_min_delay,
)
from .scenario import STORAGE, USER, Scenario, ScenarioError, make_scenario
from .schedule import (
    AllocationSchedule,
    ReplayReport,
    ScheduleError,
    SolveResult,
    ValidationReport,
    extract_schedule,
    replay_policy,
    solve_scenario,
    validate_schedule,
)

__all__ = [
    "FEASIBILITY",
    "MAX_WEGR",
    "MIN_DELAY",
    "OBJECTIVES",
    "POLICIES",
    "STORAGE",
    "USER",
    "AllocationSchedule",
    "ReplayReport",
    "Scenario",
    "ScenarioError",
    "ScheduleError",
    "SolveResult",
    "ValidationReport",
    "build",
    "build_feasibility_h1",
    "build_feasibility_inf",
    "build_feasibility_multih",
    "build_for",
    "build_max_wegr",
    "build_min_delay",
    "extract_schedule",
    "make_scenario",
    "replay_policy",
    "solve_scenario",
    "validate_schedule",
]
