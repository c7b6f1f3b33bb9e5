"""Estimation of a cusp-type signal arrival time under level misspecification.

The package simulates inhomogeneous Poisson replicates whose signal level
differs from the fitted model's, computes the Kullback-Leibler divergence
profile and its pseudo-true minimizer analytically, evaluates the
pseudo-MLE, samples the fractional-Brownian-motion limit law of the
normalized error, and verifies the convergence rate and limit
distribution by Monte Carlo.
"""

from ._kernels import USE_NUMBA, backend_name
from .errors import CuspError, NumericalError, ThresholdError, ValidationError
from .estimator import EstimationResult, pmle, pseudo_loglik
from .experiment import (
    DistReport,
    RateReport,
    consistency_contrast,
    rate_exponent_curves,
    rate_exponent_mis,
    rate_exponent_well,
    run_limit_experiment,
    run_rate_experiment,
)
from .kl import (
    KlProfile,
    LimitConstants,
    find_pseudo_true,
    gamma_kappa,
    int2p_ratio,
    kl_derivative,
    kl_divergence,
    kl_profile,
    kl_second_derivative,
    limit_constants,
)
from .limit import (
    FbmGrid,
    FbmSampler,
    LimitSample,
    drifted_argmax,
    fbm_path,
    limit_moments,
    sample_limit_argmax,
)
from .model import (
    ModelParams,
    admissible_threshold,
    contamination_admissible,
    cumulative_psi,
    psi,
    real_intensity,
    real_intensity_integral,
    theoretical_intensity,
    theoretical_intensity_integral,
)
from .sim import Dataset, ProcessSample, empirical_counting_function, simulate

__version__ = "0.1.0"

__all__ = [
    "USE_NUMBA",
    "backend_name",
    "CuspError",
    "ValidationError",
    "NumericalError",
    "ThresholdError",
    "ModelParams",
    "psi",
    "cumulative_psi",
    "theoretical_intensity",
    "real_intensity",
    "theoretical_intensity_integral",
    "real_intensity_integral",
    "admissible_threshold",
    "contamination_admissible",
    "KlProfile",
    "LimitConstants",
    "kl_divergence",
    "kl_derivative",
    "kl_second_derivative",
    "find_pseudo_true",
    "gamma_kappa",
    "limit_constants",
    "int2p_ratio",
    "kl_profile",
    "ProcessSample",
    "Dataset",
    "simulate",
    "empirical_counting_function",
    "EstimationResult",
    "pseudo_loglik",
    "pmle",
    "FbmGrid",
    "FbmSampler",
    "LimitSample",
    "fbm_path",
    "drifted_argmax",
    "sample_limit_argmax",
    "limit_moments",
    "RateReport",
    "DistReport",
    "run_rate_experiment",
    "run_limit_experiment",
    "consistency_contrast",
    "rate_exponent_curves",
    "rate_exponent_well",
    "rate_exponent_mis",
]
