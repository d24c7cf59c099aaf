"""Design-based subsampling for scalable double machine learning.

Pipeline: standardise and rotate the covariates (``preprocess``), pick a
low-discrepancy skeleton by generator search under the mixture discrepancy
(``design``), match each skeleton anchor to its nearest treated and control
unit (``matching``), then run cross-fitted AIPW estimation on the selected
rows (``dml``). ``dgp`` simulates the benchmark scenarios, ``bench`` drives
the Monte Carlo experiments, ``cli`` exposes everything on the command line.
"""

from .bench import ExperimentSpec, bootstrap_real, normality_diagnostics, run_experiment
from .design import (UDSkeleton, build_candidate, cache_lookup, cache_store,
                     gefd_sq, is_admissible, mixture_discrepancy_sq,
                     search_skeleton, skeleton_with_cache)
from .dgp import Dataset, DgpSpec, analytic_nuisance, load_csv, save_csv, simulate
from .dml import (EstimateReport, SeedBundle, aipw_pseudo_outcome, cross_fit,
                  estimate_full, estimate_ud, estimate_uniform,
                  normal_quantile, uniform_subsample)
from .errors import InvalidInputError, PreconditionError, UddmlError
from .kernels import ACTIVE_BACKEND
from .matching import (ArmIndex, SubsampleSelection, build_arm_index,
                       select_pairs, standardized_mean_differences)
from .nuisance import (BoostingParams, FittedNuisance, NuisanceConfig,
                       fit_nuisance, predict_propensity)
from .preprocess import (RotatedSpace, ecdf_forward, ecdf_inverse,
                         fit_rotation, rotate)

__version__ = "0.1.0"

__all__ = [
    "ACTIVE_BACKEND",
    "ArmIndex",
    "BoostingParams",
    "Dataset",
    "DgpSpec",
    "EstimateReport",
    "ExperimentSpec",
    "FittedNuisance",
    "InvalidInputError",
    "NuisanceConfig",
    "PreconditionError",
    "RotatedSpace",
    "SeedBundle",
    "SubsampleSelection",
    "UDSkeleton",
    "UddmlError",
    "aipw_pseudo_outcome",
    "analytic_nuisance",
    "bootstrap_real",
    "build_arm_index",
    "build_candidate",
    "cache_lookup",
    "cache_store",
    "cross_fit",
    "ecdf_forward",
    "ecdf_inverse",
    "estimate_full",
    "estimate_ud",
    "estimate_uniform",
    "fit_nuisance",
    "fit_rotation",
    "gefd_sq",
    "is_admissible",
    "load_csv",
    "mixture_discrepancy_sq",
    "normal_quantile",
    "normality_diagnostics",
    "predict_propensity",
    "rotate",
    "run_experiment",
    "save_csv",
    "search_skeleton",
    "select_pairs",
    "simulate",
    "skeleton_with_cache",
    "standardized_mean_differences",
    "uniform_subsample",
]
