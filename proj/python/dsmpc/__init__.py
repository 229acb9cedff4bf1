"""Stochastic MPC with a discounted output-risk budget.

Thin re-export of the compiled core; see the package README for the model
file format and the CLI equivalents of these entry points.
"""

from ._core import (  # noqa: F401
    ChebyshevTerms,
    DimensionMismatch,
    DisturbanceSampler,
    EnsembleSummary,
    Error,
    Infeasible,
    InitPolicy,
    MpcSolution,
    NonConvergence,
    NotPositiveDefinite,
    Precomputed,
    QcqpProblem,
    RunSummary,
    SingularMatrix,
    StepRecord,
    SystemModel,
    TrajectoryLog,
    ValidationCheck,
    ValidationReport,
    __version__,
    build_constraint,
    build_problem,
    equation_residuals,
    expected_epsilon_next,
    load_model,
    lq_gain,
    lq_output_bound,
    min_constraint_value,
    model_from_json_text,
    model_hash,
    model_to_json_text,
    monte_carlo,
    precompute,
    reconstruct_disturbance,
    run,
    shifted_sequence,
    solve,
    solve_mpc,
    terminal_f,
    update_epsilon,
    validate,
)
