"""Block-floating-point multigrid: setup, solvers and precision estimation."""
from .estimate import (ETA_GRID, PrecEstimate, WEstimate, bfp_prec_est, binary_search_min,
                       conv_rate_vcycle, estimate_eta, estimate_w, estimated_schedule, exact_rate)
from .hierarchy import (ChebCoeffs, Hierarchy, LevelData, chebyshev_coeffs, level_data,
                        max_gen_eig_upper, solver_setup)
from .minwidth import STAGES, MinWidthResult, WidthRun, accepts, min_widths
from .policy import DEFAULT_W_ADD, STEPS, GammaPolicy, TraceRecord
from .solver import (DEFAULT_N, BfpMultigrid, FMGResult, IRResult, Schedule, default_n, fmg, ir,
                     vcycle)

__all__ = [
    "ETA_GRID", "PrecEstimate", "WEstimate", "bfp_prec_est", "binary_search_min",
    "conv_rate_vcycle", "estimate_eta", "estimate_w", "estimated_schedule", "exact_rate",
    "ChebCoeffs", "Hierarchy", "LevelData", "chebyshev_coeffs", "level_data",
    "max_gen_eig_upper", "solver_setup", "DEFAULT_W_ADD", "STEPS", "GammaPolicy", "TraceRecord",
    "DEFAULT_N", "BfpMultigrid", "FMGResult", "IRResult", "Schedule", "default_n", "fmg", "ir",
    "vcycle", "STAGES", "MinWidthResult", "WidthRun", "accepts", "min_widths",
]
