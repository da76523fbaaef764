"""Model path selection: resampling-based forests of similarly-accurate
forward-selected models, for any model class under squared-error loss."""

__version__ = "0.1.0"

from ._kernels import BACKEND as KERNEL_BACKEND
from .datasets import (DataMatrix, SyntheticSpec, TrainTestPair, gen_linear,
                       gen_motivating, load_csv, make_beta, toeplitz_cov)
from .engine import (MpsConfig, PathForest, PathNode, StabilityResult,
                     enumerate_models, run_fss, run_mps, run_stability_selection)
from .learners import (FittedModel, LossKind, ModelClass, best_next_covariate,
                       cv_forward_depth, fit, forward_select, lasso_cv, loss,
                       oracle_fit)
from .ranking import exact_pcs, find_min_D, sample_until_max, select_cells
from .reporting import (SimResultRow, SimSpec, aggregate, min_rte_over_set,
                        proportion_win, rte, run_simulation)
from .resampling import (ResamplePlan, derive_rng, draw_bootstrap, draw_subsample,
                         selection_proportion_diagnostic)
from .viz import RenderOptions, forest_from_json, to_dot, to_json, to_svg_radial

__all__ = [
    "KERNEL_BACKEND",
    "DataMatrix", "SyntheticSpec", "TrainTestPair", "gen_linear",
    "gen_motivating", "load_csv", "make_beta", "toeplitz_cov",
    "MpsConfig", "PathForest", "PathNode", "StabilityResult",
    "enumerate_models", "run_fss", "run_mps", "run_stability_selection",
    "FittedModel", "LossKind", "ModelClass", "best_next_covariate",
    "cv_forward_depth", "fit", "forward_select", "lasso_cv", "loss",
    "oracle_fit",
    "exact_pcs", "find_min_D", "sample_until_max", "select_cells",
    "SimResultRow", "SimSpec", "aggregate", "min_rte_over_set",
    "proportion_win", "rte", "run_simulation",
    "ResamplePlan", "derive_rng", "draw_bootstrap", "draw_subsample",
    "selection_proportion_diagnostic",
    "RenderOptions", "forest_from_json", "to_dot", "to_json", "to_svg_radial",
]
