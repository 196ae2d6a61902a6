"""Entropy-penalized linear programming with explicit convergence bounds."""

from .bounds import (
    BoundReport,
    assignment_eta_lower_threshold,
    check_report,
    eta_for_epsilon,
    face_distance,
    face_distance_bound,
    fast_bound,
    simplex_no_progress_threshold,
    simplex_rate_lower_bound,
    slow_bound,
    worst_case_assignment_cost,
)
from .model import (
    AssignmentInstance,
    InstanceError,
    LpInstance,
    PolytopeProfile,
    SimplexFamily,
    binary_entropy,
    entropy,
    enumerate_vertices,
    load_instance,
    profile,
    tau_gap,
    validate,
)
from .solver import (
    PenalizedSolution,
    ScalingState,
    SolverError,
    marginal_error,
    solve,
    solve_dual_ascent,
    solve_gibbs,
    solve_sinkhorn,
)

__version__ = "0.1.0"
