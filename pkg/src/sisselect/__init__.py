"""Sure independence screening and two-stage variable selection for ultrahigh-dimensional linear models."""

from .core import (Dataset, GroundTruth, ModelEstimate, StandardizedDesign, l2_error,
                   ols_fit, read_dataset_csv, standardize, write_dataset_csv)
from .dantzig import DantzigConfig, dantzig_select, hard_threshold_topk, simplex_solve
from .penalized import (Penalty, PenaltySpec, SolverConfig, adaptive_lasso_fit, bic_select,
                        lla_fit, weighted_lasso_cd)
from .pipelines import Method, PipelineSpec, classify, run_pipeline
from .screening import (RIDGE_INF, IsisConfig, ItrrsConfig, classif_screen, isis_select,
                        itrrs_screen, sis_screen)
from .simgen import Design, SimulationSpec, generate

__version__ = "0.1.0"

__all__ = [
    "Dataset", "GroundTruth", "ModelEstimate", "StandardizedDesign", "l2_error", "ols_fit",
    "read_dataset_csv", "standardize", "write_dataset_csv", "DantzigConfig", "dantzig_select",
    "hard_threshold_topk", "simplex_solve", "Penalty", "PenaltySpec", "SolverConfig",
    "adaptive_lasso_fit", "bic_select", "lla_fit", "weighted_lasso_cd", "Method",
    "PipelineSpec", "classify", "run_pipeline", "RIDGE_INF", "IsisConfig", "ItrrsConfig",
    "classif_screen", "isis_select", "itrrs_screen", "sis_screen", "Design", "SimulationSpec",
    "generate",
]
