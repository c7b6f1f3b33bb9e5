"""Dataset generation: independent Poisson replicates of the real intensity.

Each replicate is drawn by thinning: candidates arrive as a homogeneous
Poisson process at the constant rate lam_max = max(lam0, lam_plus, S+lam0)
(an exact bound, both intensities are sandwiched between their plateau
levels) and a candidate at time t survives with probability
lam_star(t) / lam_max.  Candidate counts, times and acceptance variables
for replicate j are read from a counter-based stream keyed by
(seed, j), so regenerating any replicate is independent of execution
order and thread count; see ``_kernels`` for the stream construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ._kernels import simulate_events
from .errors import ValidationError
from .model import ModelParams

__all__ = ["ProcessSample", "Dataset", "simulate", "empirical_counting_function"]


@dataclass(frozen=True)
class ProcessSample:
    """One replicate: strictly increasing event times inside [0, tau]."""

    events: np.ndarray

    def __post_init__(self):
        ev = np.asarray(self.events, dtype=np.float64)
        object.__setattr__(self, "events", ev)
        if ev.ndim != 1:
            raise ValidationError("events must be a one-dimensional array")
        if ev.size and not np.all(np.diff(ev) > 0.0):
            raise ValidationError("events must be strictly increasing")

    @classmethod
    def _trusted(cls, events: np.ndarray) -> "ProcessSample":
        # construction path for the simulator, which sorts its own output
        obj = object.__new__(cls)
        object.__setattr__(obj, "events", events)
        return obj

    def __len__(self) -> int:
        return self.events.shape[0]


@dataclass(frozen=True)
class Dataset:
    """n independent replicates plus the parameters and seed that made them."""

    replicates: list[ProcessSample]
    params: ModelParams
    seed: int

    @property
    def n(self) -> int:
        return len(self.replicates)

    def pooled_events(self) -> np.ndarray:
        """All event times of all replicates, sorted ascending."""
        if not self.replicates:
            return np.empty(0)
        return np.sort(np.concatenate([r.events for r in self.replicates]))

    def total_events(self) -> int:
        return sum(len(r) for r in self.replicates)

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "seed": int(self.seed),
            "replicates": [r.events.tolist() for r in self.replicates],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Dataset":
        try:
            params = ModelParams.from_dict(d["params"])
            seed = int(d["seed"])
            raw = d["replicates"]
        except KeyError as exc:
            raise ValidationError(f"dataset is missing field {exc}") from exc
        reps = []
        for arr in raw:
            ev = np.asarray(arr, dtype=np.float64)
            if ev.size and (ev[0] < 0.0 or ev[-1] > params.tau):
                raise ValidationError("event times must lie in [0, tau]")
            reps.append(ProcessSample(ev))
        return cls(replicates=reps, params=params, seed=seed)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "Dataset":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_csv(self, path) -> None:
        """(replicate_id, event_time) rows for external tools."""
        with open(path, "w") as fh:
            fh.write("replicate_id,event_time\n")
            for j, rep in enumerate(self.replicates):
                for t in rep.events:
                    fh.write(f"{j},{t!r}\n")


def simulate(params: ModelParams, n: int, seed: int) -> Dataset:
    """Draw n replicates from the real intensity; bit-reproducible in seed."""
    if n < 1:
        raise ValidationError(f"n must be at least 1, got {n}")
    lam_max = max(params.lambda0, params.lambda_plus, params.S + params.lambda0)
    flat, counts = simulate_events(
        seed, n, params.tau, lam_max, params.signal_real, params.lambda0,
        params.kappa, params.delta, params.theta0,
    )
    offsets = np.concatenate([[0], np.cumsum(counts)])
    reps = [
        ProcessSample._trusted(flat[offsets[j]:offsets[j + 1]]) for j in range(n)
    ]
    return Dataset(replicates=reps, params=params, seed=int(seed))


def empirical_counting_function(sample: ProcessSample, t: float) -> int:
    """Number of events at or before t; right-continuous step function."""
    return int(np.searchsorted(sample.events, t, side="right"))
