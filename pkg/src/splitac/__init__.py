"""Splitting schemes for the 1D stochastic Allen-Cahn equation.

The equation, posed on (0, 1) with homogeneous Dirichlet boundary
conditions and driven by space-time white noise, is advanced in time by
composing the exact flow of the bistable reaction z - z^3 with a
one-step integrator of the stochastic heat part.  The package bundles
the spatial discretization, the closed-form reaction flow, reproducible
counter-addressed noise with dyadic path coupling, four splitting
steppers, and the coupled Monte Carlo estimators used to measure strong
and weak orders of convergence.
"""

__version__ = "0.1.0"

from .grid import (
    DiscreteOperator,
    GridFunction,
    Mesh,
    apply_laplacian,
    apply_semigroup,
    eigenvector,
    norm_e,
    norm_h,
    solve_resolvent,
)
from .flows import FlowParams, phi, phi_grid, psi, run_lemma_suites
from .noise import IncrementBlock, NoisePlan, coarsen, fine_increment, replica_stream
from .schemes import (
    SchemeSpec,
    StepState,
    TrajectoryStats,
    run_trajectory,
    step_m1,
    step_m2,
    step_m3,
    step_strang,
)
from .experiments import (
    ConvergenceTable,
    ExperimentConfig,
    evaluate_test_function,
    fit_slope,
    initial_condition,
    localization_stats,
    strong_error,
    strong_table,
    sup_norm_moment,
    weak_error_increment,
    weak_error_telescoped,
    weak_table,
)

__all__ = [
    "__version__",
    "Mesh", "GridFunction", "DiscreteOperator",
    "apply_laplacian", "solve_resolvent", "apply_semigroup",
    "norm_h", "norm_e", "eigenvector",
    "FlowParams", "phi", "psi", "phi_grid", "run_lemma_suites",
    "NoisePlan", "IncrementBlock", "fine_increment", "coarsen",
    "replica_stream",
    "SchemeSpec", "StepState", "TrajectoryStats",
    "step_m1", "step_m2", "step_m3", "step_strang", "run_trajectory",
    "ExperimentConfig", "ConvergenceTable",
    "strong_error", "strong_table", "weak_error_increment",
    "weak_error_telescoped", "weak_table", "evaluate_test_function",
    "fit_slope", "localization_stats", "sup_norm_moment",
    "initial_condition",
]
