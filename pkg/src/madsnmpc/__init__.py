"""Mesh adaptive direct search for simulation-based optimal control.

Modules
-------
mads
    The MADS solver with extremal and progressive barriers.
integrator
    Adaptive Dormand-Prince 5(4) integration with terminal events.
ocp
    Optimal control problems, input parameterizations and the single-shooting
    blackbox evaluation consumed by :func:`madsnmpc.mads.solve`.
rocket
    The robust apogee-targeting rocket problem.
cli
    Command-line front end (``madsnmpc solve`` / ``madsnmpc simulate``).
"""

__version__ = "0.1.0"

from .integrator import IntegrationConfig, IntegrationError, OdeSystem, TrajectoryRecord, integrate, integrate_to_event
from .mads import (
    ConfigurationError,
    Evaluation,
    Outcome,
    SolveReport,
    SolverConfig,
    SpeculativeSearch,
    TerminationReason,
    solve,
)
from .ocp import (
    DecisionHorizon,
    EventHorizon,
    FixedHorizon,
    InterpolatedPolynomial,
    OcpProblem,
    PiecewiseConstantSwitching,
    ZeroOrderHold,
    as_blackbox,
    evaluate_candidate,
)
from .rocket import RobustRocketProblem, RocketParams, ThrottleSchedule, build_robust_problem, simulate_tube

__all__ = [
    "ConfigurationError",
    "DecisionHorizon",
    "Evaluation",
    "EventHorizon",
    "FixedHorizon",
    "IntegrationConfig",
    "IntegrationError",
    "InterpolatedPolynomial",
    "OcpProblem",
    "OdeSystem",
    "Outcome",
    "PiecewiseConstantSwitching",
    "RobustRocketProblem",
    "RocketParams",
    "SolveReport",
    "SolverConfig",
    "SpeculativeSearch",
    "TerminationReason",
    "ThrottleSchedule",
    "TrajectoryRecord",
    "ZeroOrderHold",
    "as_blackbox",
    "build_robust_problem",
    "evaluate_candidate",
    "integrate",
    "integrate_to_event",
    "simulate_tube",
    "solve",
]
