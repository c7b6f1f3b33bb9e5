"""Monte Carlo verification harness for the estimator's asymptotics.

Checks, at desk scale, that the pseudo-MLE converges to the pseudo-true
point theta_hat (not the true theta0), that its RMSE decays like
n^(-1/(3-2 kappa)) so log RMSE regresses on log n with slope
-1/(3-2 kappa), and that the normalized errors

    n^(1/(3-2 kappa)) * (theta_n - theta_hat) / b

match the simulated limit argmax in two-sample KS distance and low
moments.  Every dataset seed is derived from (master seed, n, replicate),
so reports regenerate bit-identically regardless of worker count or
schedule; replicate results are aggregated in index order.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import ks_2samp

from .errors import ValidationError
from .estimator import DEFAULT_REFINEMENTS, pmle
from .kl import find_pseudo_true, limit_constants
from .limit import LimitSample
from .model import ModelParams, contamination_admissible
from .sim import simulate

__all__ = [
    "RateReport",
    "DistReport",
    "run_rate_experiment",
    "run_limit_experiment",
    "consistency_contrast",
    "rate_exponent_curves",
    "rate_exponent_well",
    "rate_exponent_mis",
]


def dataset_seed(master_seed: int, n: int, replicate: int) -> int:
    """64-bit dataset seed derived deterministically from (seed, n, replicate)."""
    ss = np.random.SeedSequence((int(master_seed), int(n), int(replicate)))
    return int(ss.generate_state(1, np.uint64)[0])


def _estimate_once(args) -> float:
    params, n, rep, master_seed, coarse_step, refinements, domain = args
    ds = simulate(params, n, dataset_seed(master_seed, n, rep))
    return pmle(params, ds, coarse_step, refinements, domain).theta_n


def _map_work(items, workers: int) -> list[float]:
    if workers > 1 and len(items) > 1:
        chunk = max(1, len(items) // (workers * 8))
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_estimate_once, items, chunksize=chunk))
    return [_estimate_once(it) for it in items]


def _require_consistent_contamination(params: ModelParams) -> None:
    ok, thr = contamination_admissible(params.S, params.lambda0, params.h)
    if not ok:
        raise ValidationError(f"h = {params.h} is inadmissible (threshold {thr:.6g})")
    if params.h == 0.0:
        raise ValidationError("h = 0 is the correctly specified model; nothing to contrast")


@dataclass(frozen=True)
class RateReport:
    """Per-n error summaries and the fitted RMSE decay exponent."""

    n_values: list[int]
    errors: list[list[float]]
    rmse: list[float]
    median_abs_error: list[float]
    fitted_slope: float
    expected_slope: float
    phi_n: list[float]
    theta_hat: float
    b: float
    seed: int
    replications: int

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.n_values, self.n_values[1:])):
            raise ValidationError("n_values must be strictly increasing")
        if any(not r > 0.0 for r in self.rmse):
            raise ValidationError("rmse must be strictly positive")

    def to_dict(self) -> dict:
        return {
            "n_values": self.n_values,
            "errors": self.errors,
            "rmse": self.rmse,
            "median_abs_error": self.median_abs_error,
            "fitted_slope": self.fitted_slope,
            "expected_slope": self.expected_slope,
            "phi_n": self.phi_n,
            "theta_hat": self.theta_hat,
            "b": self.b,
            "seed": self.seed,
            "replications": self.replications,
        }


@dataclass(frozen=True)
class DistReport:
    """Normalized errors at one n against a reference limit sample."""

    n: int
    replications: int
    normalized_errors: list[float]
    limit_draws: list[float]
    ks_statistic: float
    moment_table: list[dict]
    theta_hat: float
    b: float
    seed: int

    def __post_init__(self):
        if not 0.0 <= self.ks_statistic <= 1.0:
            raise ValidationError("ks_statistic must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "replications": self.replications,
            "normalized_errors": self.normalized_errors,
            "limit_draws": self.limit_draws,
            "ks_statistic": self.ks_statistic,
            "moment_table": self.moment_table,
            "theta_hat": self.theta_hat,
            "b": self.b,
            "seed": self.seed,
        }


def run_rate_experiment(
    params: ModelParams,
    n_values: list[int],
    replications: int,
    seed: int,
    workers: int = 1,
    coarse_step: float | None = None,
    refinements: int = DEFAULT_REFINEMENTS,
    likelihood_domain: str = "paper",
) -> RateReport:
    """Estimate on fresh datasets for each n and fit the RMSE decay slope."""
    _require_consistent_contamination(params)
    if len(n_values) < 2:
        raise ValidationError("need at least two n values to fit a slope")
    if replications < 1:
        raise ValidationError("replications must be at least 1")
    theta_hat = find_pseudo_true(params)
    consts = limit_constants(params, theta_hat)
    rate = 1.0 / (3.0 - 2.0 * params.kappa)

    items = [
        (params, n, rep, seed, coarse_step, refinements, likelihood_domain)
        for n in n_values
        for rep in range(replications)
    ]
    estimates = _map_work(items, workers)

    errors, rmse, med = [], [], []
    for i, n in enumerate(n_values):
        block = np.array(estimates[i * replications:(i + 1) * replications])
        err = np.abs(block - theta_hat)
        errors.append(err.tolist())
        rmse.append(float(np.sqrt(np.mean(err**2))))
        med.append(float(np.median(err)))
    slope = float(np.polyfit(np.log(np.asarray(n_values, float)), np.log(rmse), 1)[0])
    return RateReport(
        n_values=[int(n) for n in n_values],
        errors=errors,
        rmse=rmse,
        median_abs_error=med,
        fitted_slope=slope,
        expected_slope=-rate,
        phi_n=[float(consts.b * n ** (-rate)) for n in n_values],
        theta_hat=theta_hat,
        b=consts.b,
        seed=int(seed),
        replications=int(replications),
    )


def run_limit_experiment(
    params: ModelParams,
    n: int,
    replications: int,
    limit_sample: LimitSample,
    seed: int,
    workers: int = 1,
    coarse_step: float | None = None,
    refinements: int = DEFAULT_REFINEMENTS,
    likelihood_domain: str = "paper",
) -> DistReport:
    """Compare normalized errors at one n against reference limit draws."""
    _require_consistent_contamination(params)
    if replications < 1:
        raise ValidationError("replications must be at least 1")
    expected_hurst = params.kappa + 0.5
    if abs(limit_sample.grid.hurst - expected_hurst) > 1e-12:
        raise ValidationError(
            f"limit sample has Hurst {limit_sample.grid.hurst}, model needs {expected_hurst}"
        )
    theta_hat = find_pseudo_true(params)
    consts = limit_constants(params, theta_hat)
    rate = 1.0 / (3.0 - 2.0 * params.kappa)

    items = [
        (params, n, rep, seed, coarse_step, refinements, likelihood_domain)
        for rep in range(replications)
    ]
    estimates = np.array(_map_work(items, workers))
    normalized = (estimates - theta_hat) * n**rate / consts.b

    ks = float(ks_2samp(normalized, limit_sample.draws).statistic)
    table = []
    for p in (1.0, 2.0):
        emp = np.abs(normalized) ** p
        ref = np.abs(limit_sample.draws) ** p
        se_emp = float(np.std(emp, ddof=1) / math.sqrt(emp.size)) if emp.size > 1 else math.nan
        se_ref = float(np.std(ref, ddof=1) / math.sqrt(ref.size)) if ref.size > 1 else math.nan
        table.append({
            "p": p,
            "empirical": float(np.mean(emp)),
            "empirical_se": se_emp,
            "limit": float(np.mean(ref)),
            "limit_se": se_ref,
            "gap": float(abs(np.mean(emp) - np.mean(ref))),
            "combined_se": float(math.hypot(se_emp, se_ref)),
        })
    return DistReport(
        n=int(n),
        replications=int(replications),
        normalized_errors=normalized.tolist(),
        limit_draws=np.asarray(limit_sample.draws).tolist(),
        ks_statistic=ks,
        moment_table=table,
        theta_hat=theta_hat,
        b=consts.b,
        seed=int(seed),
    )


def consistency_contrast(
    params: ModelParams,
    n: int,
    replications: int,
    seed: int,
    workers: int = 1,
    coarse_step: float | None = None,
    refinements: int = DEFAULT_REFINEMENTS,
    likelihood_domain: str = "paper",
) -> dict:
    """Fraction of replicates landing closer to theta_hat than to theta0.

    Demonstrates that the estimator tracks the divergence minimizer rather
    than the true arrival time; degenerate for h = 0 (rejected).
    """
    _require_consistent_contamination(params)
    if replications < 1:
        raise ValidationError("replications must be at least 1")
    theta_hat = find_pseudo_true(params)
    items = [
        (params, n, rep, seed, coarse_step, refinements, likelihood_domain)
        for rep in range(replications)
    ]
    estimates = np.array(_map_work(items, workers))
    closer = np.abs(estimates - theta_hat) < np.abs(estimates - params.theta0)
    return {
        "fraction_closer_to_pseudo_true": float(np.mean(closer)),
        "n": int(n),
        "replications": int(replications),
        "theta_hat": theta_hat,
        "theta0": params.theta0,
        "seed": int(seed),
    }


def rate_exponent_well(kappa: float) -> float:
    """MSE decay exponent 2/(2 kappa + 1) of the correctly specified model."""
    return 2.0 / (2.0 * kappa + 1.0)


def rate_exponent_mis(kappa: float) -> float:
    """MSE decay exponent 2/(3 - 2 kappa) under signal-level misspecification."""
    return 2.0 / (3.0 - 2.0 * kappa)


def rate_exponent_curves(kappa_grid) -> dict:
    """Both exponent curves on a grid inside (0, 1/2), plus the regular-case
    plateau value 1 that applies for kappa > 1/2."""
    grid = [float(k) for k in kappa_grid]
    if any(not 0.0 < k < 0.5 for k in grid):
        raise ValidationError("kappa grid must lie inside (0, 1/2)")
    return {
        "kappa": grid,
        "gamma_well": [rate_exponent_well(k) for k in grid],
        "gamma_mis": [rate_exponent_mis(k) for k in grid],
        "plateau_above_half": 1.0,
    }
