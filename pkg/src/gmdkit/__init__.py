"""gmdkit: two-way structured regression, inference, and kernel screens.

The package estimates linear models whose rows and columns carry auxiliary
similarity structure (kernels H and Q), provides bias-corrected per-
coefficient tests with optional robustness to a misspecified row kernel,
permutation screens for kernel informativeness, and a reproducible
synthetic benchmark harness.
"""

from .estimators import (
    GcvPath,
    GmdEstimate,
    WeightSpec,
    fit_gamma,
    fit_gmdr,
    fit_kpr,
    loocv_rmse,
    select_components,
    select_top_components,
    vi_scores,
)
from .exceptions import (
    ConvergenceError,
    DegenerateInputError,
    DimensionError,
    GmdkitError,
    KernelError,
)
from .inference import (
    InferenceReport,
    InitialEstimate,
    bias_correct,
    by_qvalues,
    default_lambda,
    estimate_sigma2,
    initial_estimator,
    min_detectable_effect,
    p_values,
    psi_bound,
    run_gmdi,
    variance_rjj,
    xi_matrix,
)
from .io import load_matrix, write_matrix
from .kernels import (
    KernelTestResult,
    clr_transform,
    gower_center,
    inverse_euclidean_kernel,
    kernel_from_sq_distance,
    krv,
    mirkat,
)
from .linalg import (
    GmdFactors,
    TwoWayDataset,
    center_hq,
    cholesky_factor,
    gmd,
    hq_norm,
    standardize_columns,
)
from .robust import (
    RobustWeights,
    estimate_tau,
    mix_with_identity,
    normalize_spectral,
    run_robust_gmdi,
)
from .simulate import (
    NoiseModel,
    SettingSpec,
    SimulationReport,
    build_setting,
    eigvec_signal,
    hard_threshold,
    matrix_variate_normal,
    perturbed_noise,
    run_experiment,
)
from .solvers import organic_lasso_min_value, weighted_lasso

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError", "DegenerateInputError", "DimensionError",
    "GmdkitError", "KernelError",
    "GmdFactors", "TwoWayDataset", "center_hq", "cholesky_factor", "gmd",
    "hq_norm", "standardize_columns",
    "GcvPath", "GmdEstimate", "WeightSpec", "fit_gamma", "fit_gmdr",
    "fit_kpr", "loocv_rmse", "select_components", "select_top_components",
    "vi_scores",
    "InferenceReport", "InitialEstimate", "bias_correct", "by_qvalues",
    "default_lambda", "estimate_sigma2", "initial_estimator",
    "min_detectable_effect", "p_values", "psi_bound", "run_gmdi",
    "variance_rjj", "xi_matrix",
    "KernelTestResult", "clr_transform", "gower_center",
    "inverse_euclidean_kernel", "kernel_from_sq_distance", "krv", "mirkat",
    "RobustWeights", "estimate_tau", "mix_with_identity",
    "normalize_spectral", "run_robust_gmdi",
    "NoiseModel", "SettingSpec", "SimulationReport", "build_setting",
    "eigvec_signal", "hard_threshold", "matrix_variate_normal",
    "perturbed_noise", "run_experiment",
    "organic_lasso_min_value", "weighted_lasso",
    "load_matrix", "write_matrix",
    "__version__",
]
