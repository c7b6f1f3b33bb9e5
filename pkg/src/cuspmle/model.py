"""Intensity model for a cusp-type signal arrival observed in Poisson noise.

The statistician's (theoretical) intensity on the window [0, tau] is

    lam(theta, t) = S * psi(t - theta) + lam0,

with a cusp front psi(x) = (x/delta)^kappa on 0 < x < delta, 0 before, 1
after, and cusp order kappa in (0, 1/2).  The data-generating (real)
intensity carries a contaminated signal level,

    lam_star(t) = (S + h) * psi(t - theta0) + lam0,

where theta0 is the true arrival time.  The contamination h is admissible
(the divergence profile has a unique interior minimum and the estimator
remains consistent for the pseudo-true point) iff

    h > S / ln(1 + S/lam0) - S - lam0,

a threshold that always lies in (-S, 0).

The arrival time ranges over theta0_window = (alpha, beta) for the real
model, while the fitted model searches the widened window
theta_window = (alpha - delta, beta + delta) contained in (0, tau - delta).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

__all__ = [
    "ModelParams",
    "psi",
    "cumulative_psi",
    "theoretical_intensity",
    "real_intensity",
    "theoretical_intensity_integral",
    "real_intensity_integral",
    "admissible_threshold",
    "contamination_admissible",
]


def psi(x, kappa: float, delta: float):
    """Cusp front: (x/delta)^kappa on 0 < x < delta, 0 for x <= 0, 1 for x >= delta.

    Continuous and nondecreasing, but not Lipschitz at 0 (infinite slope).
    Accepts scalars or arrays; total in x.
    """
    if not 0.0 < kappa < 0.5:
        raise ValidationError(f"kappa must lie in (0, 1/2), got {kappa}")
    if delta <= 0.0:
        raise ValidationError(f"delta must be positive, got {delta}")
    x = np.asarray(x, dtype=float)
    scaled = np.clip(x / delta, 0.0, 1.0)
    out = scaled**kappa
    if out.ndim == 0:
        return float(out)
    return out


def cumulative_psi(x, kappa: float, delta: float):
    """Integral of the cusp front from 0 to x.

    Equals delta/(kappa+1) * (x/delta)^(kappa+1) on [0, delta] and grows
    linearly (slope 1) past the plateau; 0 for x <= 0.
    """
    x = np.asarray(x, dtype=float)
    scaled = np.clip(x / delta, 0.0, 1.0)
    ramp = delta / (kappa + 1.0) * scaled ** (kappa + 1.0)
    out = ramp + np.maximum(x - delta, 0.0)
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class ModelParams:
    """All scalar parameters of the theoretical/real intensity pair.

    Attributes
    ----------
    S : signal level of the fitted model (> 0).
    h : contamination; the real signal level is S + h.
    lambda0 : homogeneous noise intensity (> 0).
    kappa : cusp order, strictly inside (0, 1/2).
    delta : front width (> 0).
    tau : observation horizon (> 0).
    theta0 : true arrival time, inside theta0_window.
    theta0_window : (alpha, beta), the set of possible true arrival times.
    theta_window : (alpha - delta, beta + delta), the search window of the
        fitted model; derived from theta0_window when omitted.
    """

    S: float
    h: float
    lambda0: float
    kappa: float
    delta: float
    tau: float
    theta0: float
    theta0_window: tuple[float, float]
    theta_window: tuple[float, float] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        for name in ("S", "lambda0", "delta", "tau"):
            if not getattr(self, name) > 0.0:
                raise ValidationError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0.0 < self.kappa < 0.5:
            # kappa = 0 is a jump front, kappa = 1/2 the almost-smooth case;
            # both fall outside this model family.
            raise ValidationError(f"kappa must lie strictly inside (0, 1/2), got {self.kappa}")
        if self.S + self.h + self.lambda0 <= 0.0:
            raise ValidationError(
                f"S + h + lambda0 = {self.S + self.h + self.lambda0} <= 0: "
                "the real intensity plateau would not be a valid rate"
            )
        alpha, beta = self.theta0_window
        if not alpha < beta:
            raise ValidationError(f"theta0_window must be an interval, got ({alpha}, {beta})")
        derived = (alpha - self.delta, beta + self.delta)
        if self.theta_window is None:
            object.__setattr__(self, "theta_window", derived)
        else:
            lo, hi = self.theta_window
            if not (math.isclose(lo, derived[0], rel_tol=0, abs_tol=1e-12)
                    and math.isclose(hi, derived[1], rel_tol=0, abs_tol=1e-12)):
                raise ValidationError(
                    f"theta_window {self.theta_window} must equal theta0_window "
                    f"widened by delta on each side, {derived}"
                )
            object.__setattr__(self, "theta_window", (float(lo), float(hi)))
        lo, hi = self.theta_window
        if not (lo >= 0.0 and hi <= self.tau - self.delta):
            raise ValidationError(
                f"theta_window {self.theta_window} must be contained in "
                f"(0, tau - delta) = (0, {self.tau - self.delta})"
            )
        if not alpha < self.theta0 < beta:
            raise ValidationError(
                f"theta0 = {self.theta0} must lie inside theta0_window ({alpha}, {beta})"
            )
        object.__setattr__(self, "theta0_window", (float(alpha), float(beta)))

    @property
    def lambda_plus(self) -> float:
        """Plateau level S + h + lambda0 of the real intensity."""
        return self.S + self.h + self.lambda0

    @property
    def signal_real(self) -> float:
        """Real signal level S + h."""
        return self.S + self.h

    def to_dict(self) -> dict:
        return {
            "S": self.S,
            "h": self.h,
            "lambda0": self.lambda0,
            "kappa": self.kappa,
            "delta": self.delta,
            "tau": self.tau,
            "theta0": self.theta0,
            "theta0_window": list(self.theta0_window),
            "theta_window": list(self.theta_window),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        required = {"S", "h", "lambda0", "kappa", "delta", "tau", "theta0", "theta0_window"}
        missing = required - d.keys()
        if missing:
            raise ValidationError(f"missing model field(s): {', '.join(sorted(missing))}")
        unknown = d.keys() - required - {"theta_window"}
        if unknown:
            raise ValidationError(f"unknown model field(s): {', '.join(sorted(unknown))}")
        try:
            kwargs = {
                k: float(d[k]) for k in ("S", "h", "lambda0", "kappa", "delta", "tau", "theta0")
            }
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"non-numeric model field: {exc}") from exc
        kwargs["theta0_window"] = _window(d["theta0_window"], "theta0_window")
        if d.get("theta_window") is not None:
            kwargs["theta_window"] = _window(d["theta_window"], "theta_window")
        return cls(**kwargs)


def _window(raw, name: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in raw)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{name} must be a [lo, hi] pair, got {raw!r}") from exc
    return (lo, hi)


def theoretical_intensity(params: ModelParams, theta: float, t):
    """Fitted-model intensity S * psi(t - theta) + lambda0 at time(s) t."""
    return params.S * psi(np.asarray(t, dtype=float) - theta, params.kappa, params.delta) + params.lambda0


def real_intensity(params: ModelParams, t):
    """Data-generating intensity (S + h) * psi(t - theta0) + lambda0 at time(s) t."""
    return params.signal_real * psi(np.asarray(t, dtype=float) - params.theta0, params.kappa, params.delta) + params.lambda0


def theoretical_intensity_integral(params: ModelParams, theta: float, a: float, b: float) -> float:
    """Closed-form integral of the fitted intensity over [a, b].

    Uses int_0^x psi = delta/(kappa+1) * min(x/delta, 1)^(kappa+1) + (x-delta)_+.
    """
    front = cumulative_psi(b - theta, params.kappa, params.delta) - cumulative_psi(
        a - theta, params.kappa, params.delta
    )
    return params.lambda0 * (b - a) + params.S * front


def real_intensity_integral(params: ModelParams, a: float, b: float) -> float:
    """Closed-form integral of the real intensity over [a, b]."""
    front = cumulative_psi(b - params.theta0, params.kappa, params.delta) - cumulative_psi(
        a - params.theta0, params.kappa, params.delta
    )
    return params.lambda0 * (b - a) + params.signal_real * front


def admissible_threshold(S: float, lambda0: float) -> float:
    """Lower admissibility bound S/ln(1 + S/lambda0) - S - lambda0 for h.

    Lies in (-S, 0) for every S, lambda0 > 0 (from ln x < x - 1 and
    ln x > 1 - 1/x).
    """
    if S <= 0.0 or lambda0 <= 0.0:
        raise ValidationError("S and lambda0 must be positive")
    return S / math.log1p(S / lambda0) - S - lambda0


def contamination_admissible(S: float, lambda0: float, h: float) -> tuple[bool, float]:
    """Whether h exceeds the admissibility threshold; returns (verdict, threshold)."""
    thr = admissible_threshold(S, lambda0)
    return h > thr, thr
