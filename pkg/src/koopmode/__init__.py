"""Koopman mode decomposition toolkit for gridded time-series snapshots."""

__version__ = "0.1.0"

from .cdmd import CompanionModel, companion_dmd, fit_companion, unit_circle_deviation
from .dmd import (
    DecompositionResult,
    ModeStats,
    SvdFactors,
    Vandermonde,
    exact_dmd,
    mode_stats,
    optimal_amplitudes,
    truncated_svd,
    vandermonde,
)
from .rom import (
    KoopmanTuple,
    ReducedOrderModel,
    forecast,
    mode_magnitude_grid,
    reconstruct,
    temporal_dynamics,
)
from .snapshots import (
    SnapshotMatrix,
    SnapshotPair,
    apply_mask,
    build_pairs,
    load_mask,
    load_matrix,
    save_matrix,
    stack_cycles,
    subtract_mean,
    unstack_cycles,
)
from .spdmd import (
    AdmmParams,
    ParetoPoint,
    QuadraticForm,
    SparseSolution,
    admm_solve,
    gamma_sweep,
    log_gamma_grid,
    performance_loss,
    polish,
    quadratic_form,
    select_modes,
    solve_at_gamma,
)

__all__ = [
    "__version__",
    "AdmmParams", "CompanionModel", "DecompositionResult", "KoopmanTuple",
    "ModeStats", "ParetoPoint", "QuadraticForm", "ReducedOrderModel",
    "SnapshotMatrix", "SnapshotPair", "SparseSolution", "SvdFactors",
    "Vandermonde",
    "admm_solve", "apply_mask", "build_pairs", "companion_dmd", "exact_dmd",
    "fit_companion", "forecast", "gamma_sweep", "load_mask", "load_matrix",
    "log_gamma_grid", "mode_magnitude_grid", "mode_stats", "optimal_amplitudes",
    "performance_loss", "polish", "quadratic_form", "reconstruct",
    "save_matrix", "select_modes", "solve_at_gamma", "stack_cycles",
    "subtract_mean", "temporal_dynamics", "truncated_svd",
    "unit_circle_deviation", "unstack_cycles", "vandermonde",
]
