"""Limit law of the normalized estimation error.

The limit variable is the argmax over u of

    Zhat(u) = exp( W_H(u) - u^2/2 ),

where W_H is a two-sided fractional Brownian motion with Hurst index
H = kappa + 1/2, i.e. a centered Gaussian process with covariance

    E W_H(u1) W_H(u2) = (|u1|^2H + |u2|^2H - |u1 - u2|^2H) / 2.

Paths are drawn exactly on a symmetric grid by factorizing the full
two-sided covariance matrix once (Cholesky, with a tiny diagonal jitter
retry if rounding makes it numerically semidefinite) and reusing the
factor; the -u^2/2 drift makes argmaxes beyond a few units exponentially
unlikely, and a boundary-mass invariant guards the truncation instead of
assuming it.  Each draw uses its own derived seed, so draws are
independent of chunking and execution schedule.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError

__all__ = [
    "FbmGrid",
    "LimitSample",
    "FbmSampler",
    "fbm_path",
    "drifted_argmax",
    "sample_limit_argmax",
    "limit_moments",
]

log = logging.getLogger(__name__)

_JITTER = 1e-12
_CHUNK = 256
_BOUNDARY_FRACTION_MAX = 1e-3


@dataclass(frozen=True)
class FbmGrid:
    """Symmetric grid u = -u_max, ..., -step, 0, step, ..., u_max."""

    u_max: float = 8.0
    step: float = 1.0 / 256.0
    hurst: float = 0.75

    def __post_init__(self):
        if self.u_max <= 0.0 or self.step <= 0.0:
            raise ValidationError("u_max and step must be positive")
        ratio = self.u_max / self.step
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ValidationError(
                f"u_max/step = {ratio} must be an integer so 0 is a grid node"
            )
        if not 0.5 < self.hurst < 1.0:
            raise ValidationError(f"hurst must lie in (1/2, 1), got {self.hurst}")

    @classmethod
    def for_kappa(cls, kappa: float, u_max: float = 8.0, step: float = 1.0 / 256.0) -> "FbmGrid":
        return cls(u_max=u_max, step=step, hurst=kappa + 0.5)

    @property
    def half_points(self) -> int:
        return int(round(self.u_max / self.step))

    def nodes(self) -> np.ndarray:
        m = self.half_points
        return np.arange(-m, m + 1, dtype=np.float64) * self.step

    def to_dict(self) -> dict:
        return {"u_max": self.u_max, "step": self.step, "hurst": self.hurst}


@dataclass(frozen=True)
class LimitSample:
    """Monte Carlo draws of the limit argmax with their grid settings."""

    draws: np.ndarray
    grid: FbmGrid
    seed: int

    def __post_init__(self):
        draws = np.asarray(self.draws, dtype=np.float64)
        object.__setattr__(self, "draws", draws)
        if draws.size and np.max(np.abs(draws)) > self.grid.u_max:
            raise ValidationError("draws must lie within [-u_max, u_max]")
        frac = self.boundary_mass()
        if frac >= _BOUNDARY_FRACTION_MAX:
            raise ValidationError(
                f"{frac:.2%} of draws are within one step of +-u_max; "
                f"raise u_max above {self.grid.u_max}"
            )

    def boundary_mass(self) -> float:
        if self.draws.size == 0:
            return 0.0
        near = np.abs(self.draws) >= self.grid.u_max - self.grid.step
        return float(np.mean(near))

    def to_dict(self) -> dict:
        return {
            "draws": self.draws.tolist(),
            "grid": self.grid.to_dict(),
            "seed": int(self.seed),
        }


class FbmSampler:
    """Exact-covariance fBm paths on a fixed grid, factorized once."""

    def __init__(self, grid: FbmGrid):
        self.grid = grid
        self.nodes = grid.nodes()
        self.jitter_applied = False
        nz = self.nodes[self.nodes != 0.0]
        self._nonzero_mask = self.nodes != 0.0
        h2 = 2.0 * grid.hurst
        cov = 0.5 * (
            np.abs(nz[:, None]) ** h2
            + np.abs(nz[None, :]) ** h2
            - np.abs(nz[:, None] - nz[None, :]) ** h2
        )
        try:
            self._factor = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            log.warning(
                "covariance factorization failed; retrying with diagonal jitter %.1e",
                _JITTER,
            )
            self.jitter_applied = True
            cov[np.diag_indices_from(cov)] += _JITTER
            try:
                self._factor = np.linalg.cholesky(cov)
            except np.linalg.LinAlgError as exc:
                raise NumericalError(
                    "two-sided covariance is not positive definite even after jitter"
                ) from exc

    def _normals(self, seed: int, draw_index: int, count: int) -> np.ndarray:
        rng = np.random.default_rng(np.random.SeedSequence((seed, draw_index)))
        return rng.standard_normal(count)

    def iter_path_chunks(self, n_draws: int, seed: int):
        """Yield (start, stop, paths) blocks; draw d always uses seed (seed, d)."""
        if n_draws < 1:
            raise ValidationError(f"n_draws must be at least 1, got {n_draws}")
        m = self._factor.shape[0]
        for start in range(0, n_draws, _CHUNK):
            stop = min(start + _CHUNK, n_draws)
            z = np.empty((stop - start, m))
            for d in range(start, stop):
                z[d - start] = self._normals(seed, d, m)
            paths = np.zeros((stop - start, self.nodes.shape[0]))
            paths[:, self._nonzero_mask] = z @ self._factor.T
            yield start, stop, paths

    def sample_paths(self, n_draws: int, seed: int) -> np.ndarray:
        """(n_draws, n_nodes) array of paths; W(0) = 0 in every draw."""
        out = np.zeros((n_draws, self.nodes.shape[0]))
        for start, stop, paths in self.iter_path_chunks(n_draws, seed):
            out[start:stop] = paths
        return out


def fbm_path(grid: FbmGrid, seed: int) -> np.ndarray:
    """One two-sided fBm path on the grid nodes (builds a throwaway factor)."""
    return FbmSampler(grid).sample_paths(1, seed)[0]


def drifted_argmax(nodes: np.ndarray, paths: np.ndarray) -> np.ndarray:
    """Per-path argmax node of W(u) - u^2/2, ties toward smaller |u| then smaller u."""
    order = np.lexsort((nodes, np.abs(nodes)))
    nodes_by_rank = nodes[order]
    vals = paths[:, order] - 0.5 * nodes_by_rank[None, :] ** 2
    return nodes_by_rank[np.argmax(vals, axis=1)]


def sample_limit_argmax(
    grid: FbmGrid, n_draws: int, seed: int, sampler: FbmSampler | None = None
) -> LimitSample:
    """Draws of argmax_u [W_H(u) - u^2/2] on the grid.

    Grid ties (measure zero in the continuum) break toward smaller |u|,
    then smaller u.  The construction fails if too much argmax mass sits
    within one step of the truncation boundary.
    """
    if sampler is None:
        sampler = FbmSampler(grid)
    draws = np.empty(n_draws)
    for start, stop, paths in sampler.iter_path_chunks(n_draws, seed):
        draws[start:stop] = drifted_argmax(sampler.nodes, paths)
    return LimitSample(draws=draws, grid=grid, seed=int(seed))


def limit_moments(sample: LimitSample, p_list) -> dict[float, tuple[float, float]]:
    """Monte Carlo estimates of E|u_hat|^p with their standard errors."""
    if sample.draws.size == 0:
        raise ValidationError("sample is empty")
    out = {}
    absd = np.abs(sample.draws)
    n = absd.size
    for p in p_list:
        if p < 0:
            raise ValidationError(f"moment order must be nonnegative, got {p}")
        powered = absd**p
        mean = float(np.mean(powered))
        se = float(np.std(powered, ddof=1) / math.sqrt(n)) if n > 1 else math.nan
        out[float(p)] = (mean, se)
    return out
