"""Kullback-Leibler analytics for the misspecified cusp model.

The divergence between the fitted intensity lam(theta, .) and the real
intensity lam_star is

    J(theta) = int_{theta ^ theta0}^{tau}
               [lam/lam_star - 1 - ln(lam/lam_star)] lam_star dt,

nonnegative, zero iff the intensities coincide on the integration range.
Its derivative has a four-branch closed form.  Writing r = (theta0-theta)/delta
and s = (theta-theta0)/delta:

    theta <= theta0-delta : lam0 ln(1 + S/lam0) - S                   (< 0)
    theta in [theta0-delta, theta0]:
        lam0 ln(1 + (S/lam0) r^kappa) - S r^kappa + I1(theta)
    theta in [theta0, theta0+delta]:
        lam_plus ln((S+lam0)/(S (1-s)^kappa + lam0)) + S (1-s)^kappa - S
        + I2(theta)
    theta >= theta0+delta : lam_plus ln(1 + S/lam0) - S               (> 0 on H)

with lam_plus = S + h + lam0 and the cusp-overlap integrals

    I1 = int_r^1 S kappa x^(kappa-1)
             [(S+h)(x-r)^kappa - S x^kappa] / (S x^kappa + lam0) dx,
    I2 = int_0^(1-s) S kappa x^(kappa-1)
             [(S+h)(x+s)^kappa - S x^kappa] / (S x^kappa + lam0) dx.

At theta0 both middle branches reduce to A*h with
A = 1 - (lam0/S) ln(1 + S/lam0) in (0, 1).  The second derivative is
positive on (theta0-delta, theta0) u (theta0, theta0+delta), zero outside
[theta0-delta, theta0+delta], and diverges at theta0 itself (the integrand
x^(2kappa-2) is not integrable there since 2kappa - 2 < -1).

The x^(kappa-1) endpoint singularities are removed before quadrature by
the substitution y = x^kappa (S kappa x^(kappa-1) dx = S dy), which keeps
accuracy uniform as the singular endpoint is approached.

The limit-law constants are the front normalizer

    gamma_kappa = sqrt( int_R [(v-1)_+^kappa - v_+^kappa]^2 dv ),

chosen so the fractional-Brownian limit process has unit variance at u=1,
and the error scale

    b = ( S gamma_kappa sqrt(lam_star(theta_hat))
          / (lam0 delta^kappa J''(theta_hat)) )^(2/(3-2kappa)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import NumericalError, ValidationError
from .model import (
    ModelParams,
    contamination_admissible,
    real_intensity,
    theoretical_intensity,
)

__all__ = [
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
]

_J_TOL = 1e-10        # absolute quadrature tolerance for J
_GAMMA_TOL = 1e-8     # absolute tolerance for the gamma_kappa integral
_BISECT_REL = 1e-12   # bracket width target, relative to |Theta|


def _quad(f, a, b, tol, points=None) -> float:
    if b <= a:
        return 0.0
    kwargs = {"epsabs": tol, "epsrel": 1e-12, "limit": 300}
    if points is not None:
        pts = sorted(p for p in points if a < p < b)
        if pts:
            kwargs["points"] = pts
    val, err = quad(f, a, b, **kwargs)
    if err > 100.0 * max(tol, abs(val) * 1e-12):
        raise NumericalError(
            f"quadrature on [{a}, {b}] achieved {err:.3e}, required {tol:.3e}"
        )
    return val


def kl_divergence(params: ModelParams, theta: float) -> float:
    """J(theta) by adaptive quadrature, with kinks passed as split points."""
    _check_theta(params, theta)
    a = min(theta, params.theta0)

    def integrand(t: float) -> float:
        lam = theoretical_intensity(params, theta, t)
        lam_s = real_intensity(params, t)
        return lam - lam_s - lam_s * math.log(lam / lam_s)

    kinks = (theta, params.theta0, theta + params.delta, params.theta0 + params.delta)
    return _quad(integrand, a, params.tau, _J_TOL, points=kinks)


def _overlap_integral(params: ModelParams, shift: float, lower: float, upper: float) -> float:
    """int S kappa x^(kappa-1) [(S+h)(x+shift)^kappa - S x^kappa]/(S x^kappa + lam0) dx
    over x in [lower, upper], computed in the y = x^kappa variable."""
    S, h, lam0, kappa = params.S, params.h, params.lambda0, params.kappa
    inv_kappa = 1.0 / kappa

    def f(y: float) -> float:
        x = y**inv_kappa
        return S * ((S + h) * (x + shift) ** kappa - S * y) / (S * y + lam0)

    return _quad(f, lower**kappa, upper**kappa, _J_TOL)


def kl_derivative(params: ModelParams, theta: float) -> float:
    """Closed-form J'(theta); continuous across the four branch boundaries."""
    _check_theta(params, theta)
    S, lam0, delta, theta0 = params.S, params.lambda0, params.delta, params.theta0
    if theta <= theta0 - delta:
        return lam0 * math.log1p(S / lam0) - S
    if theta >= theta0 + delta:
        return params.lambda_plus * math.log1p(S / lam0) - S
    if theta <= theta0:
        r = (theta0 - theta) / delta
        i1 = _overlap_integral(params, -r, r, 1.0)
        return lam0 * math.log1p(S / lam0 * r**params.kappa) - S * r**params.kappa + i1
    s = (theta - theta0) / delta
    i2 = _overlap_integral(params, s, 0.0, 1.0 - s)
    edge = S * (1.0 - s) ** params.kappa
    return params.lambda_plus * math.log((S + lam0) / (edge + lam0)) + edge - S + i2


def kl_second_derivative(params: ModelParams, theta: float) -> float:
    """Closed-form J''(theta); raises at theta0 where the curvature diverges."""
    _check_theta(params, theta)
    S, lam0, kappa, delta, theta0 = (
        params.S, params.lambda0, params.kappa, params.delta, params.theta0,
    )
    if theta == theta0:
        raise ValidationError(
            "J'' diverges at theta0; the profile represents it as +inf"
        )
    if theta < theta0 - delta or theta > theta0 + delta:
        return 0.0
    front = S * params.signal_real * kappa / delta  # one kappa absorbed by y = x^kappa
    inv_kappa = 1.0 / kappa
    if theta < theta0:
        r = (theta0 - theta) / delta

        # y = (x - r)^kappa leaves the bounded factor x^(kappa-1) <= r^(kappa-1)
        def f(y: float) -> float:
            x = r + y**inv_kappa
            return x ** (kappa - 1.0) / (S * x**kappa + lam0)

        val = _quad(f, 0.0, (1.0 - r) ** kappa, _J_TOL)
    else:
        s = (theta - theta0) / delta

        # y = x^kappa; (x + s)^(kappa-1) <= s^(kappa-1) stays bounded
        def f(y: float) -> float:
            x = y**inv_kappa
            return (x + s) ** (kappa - 1.0) / (S * y + lam0)

        val = _quad(f, 0.0, (1.0 - s) ** kappa, _J_TOL)
    return front * val


def find_pseudo_true(params: ModelParams) -> float:
    """Zero of J' inside (theta0-delta, theta0+delta) by bisection.

    The pseudo-true point sits left of theta0 for h > 0, right of it for
    h < 0, and equals theta0 exactly for h = 0.  Requires admissible h.
    """
    ok, thr = contamination_admissible(params.S, params.lambda0, params.h)
    if not ok:
        raise ValidationError(
            f"h = {params.h} is below the admissibility threshold {thr:.6g}; "
            "the divergence has no interior minimum"
        )
    if params.h == 0.0:
        return params.theta0
    if params.h > 0:
        lo, hi = params.theta0 - params.delta, params.theta0
    else:
        lo, hi = params.theta0, params.theta0 + params.delta
    f_lo = kl_derivative(params, lo)
    f_hi = kl_derivative(params, hi)
    if not f_lo < 0.0 < f_hi:
        raise NumericalError(
            f"no sign change of J' on [{lo}, {hi}]: J'={f_lo:.3e}, {f_hi:.3e}"
        )
    width = params.theta_window[1] - params.theta_window[0]
    tol = width * _BISECT_REL
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if kl_derivative(params, mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def gamma_kappa(kappa: float) -> float:
    """sqrt of int_R [(v-1)_+^kappa - v_+^kappa]^2 dv by split quadrature.

    Regions: v < 0 vanishes; [0, 1] is int v^(2 kappa) dv = 1/(2 kappa + 1)
    in closed form; [1, 2] is regular; the tail decays like
    kappa^2 v^(2 kappa - 2) and is integrable since kappa < 1/2.
    """
    if not 0.0 < kappa < 0.5:
        raise ValidationError(f"kappa must lie in (0, 1/2), got {kappa}")
    head = 1.0 / (2.0 * kappa + 1.0)

    def sq(v: float) -> float:
        return ((v - 1.0) ** kappa - v**kappa) ** 2

    mid = _quad(sq, 1.0, 2.0, _GAMMA_TOL)
    tail, err = quad(sq, 2.0, np.inf, epsabs=_GAMMA_TOL, epsrel=1e-12, limit=300)
    if err > 100.0 * _GAMMA_TOL:
        raise NumericalError(f"tail quadrature achieved only {err:.3e}")
    return math.sqrt(head + mid + tail)


@dataclass(frozen=True)
class LimitConstants:
    """Constants entering the limit law of the normalized estimation error."""

    gamma_kappa: float
    A: float
    b: float
    hurst: float

    def to_dict(self) -> dict:
        return {"gamma_kappa": self.gamma_kappa, "A": self.A, "b": self.b, "hurst": self.hurst}


def limit_constants(params: ModelParams, theta_hat: float | None = None) -> LimitConstants:
    """Assemble gamma_kappa, A, the error scale b, and the Hurst index.

    b needs a finite positive curvature at the pseudo-true point, so h = 0
    (where theta_hat = theta0 and the curvature diverges) is rejected.
    """
    if params.h == 0.0:
        raise ValidationError(
            "h = 0 puts the pseudo-true point at theta0 where J'' diverges; "
            "no finite error scale exists"
        )
    if theta_hat is None:
        theta_hat = find_pseudo_true(params)
    gk = gamma_kappa(params.kappa)
    a_const = 1.0 - params.lambda0 / params.S * math.log1p(params.S / params.lambda0)
    curv = kl_second_derivative(params, theta_hat)
    lam_here = float(real_intensity(params, theta_hat))
    base = params.S * gk * math.sqrt(lam_here) / (
        params.lambda0 * params.delta**params.kappa * curv
    )
    b = base ** (2.0 / (3.0 - 2.0 * params.kappa))
    return LimitConstants(gamma_kappa=gk, A=a_const, b=b, hurst=params.kappa + 0.5)


def int2p_ratio(params: ModelParams, theta1: float, theta2: float, p: float) -> float:
    """Probe of the Hoelder-type intensity-difference bound.

    Returns int_0^tau |lam(theta1,t) - lam(theta2,t)|^(2p) dt divided by
    |theta1 - theta2|^(2 p kappa + 1).  Used to check boundedness of the
    ratio over shrinking gaps, not to estimate the sharp constant.
    """
    _check_theta(params, theta1)
    _check_theta(params, theta2)
    if p < 1.0:
        raise ValidationError(f"p must be >= 1, got {p}")
    if theta1 == theta2:
        raise ValidationError("theta1 == theta2 makes the probe 0/0")

    def integrand(t: float) -> float:
        d = theoretical_intensity(params, theta1, t) - theoretical_intensity(params, theta2, t)
        return abs(d) ** (2.0 * p)

    kinks = (theta1, theta2, theta1 + params.delta, theta2 + params.delta)
    num = _quad(integrand, 0.0, params.tau, _J_TOL, points=kinks)
    return num / abs(theta1 - theta2) ** (2.0 * p * params.kappa + 1.0)


@dataclass(frozen=True)
class KlProfile:
    """Tabulated divergence profile with the pseudo-true point.

    j2 carries +inf at grid points that hit theta0 exactly; downstream
    consumers must branch on isinf rather than treat it as a magnitude.
    """

    grid: np.ndarray
    j: np.ndarray
    j1: np.ndarray
    j2: np.ndarray
    theta_hat: float
    curvature_hat: float

    def to_csv(self, path) -> None:
        arr = np.column_stack([self.grid, self.j, self.j1, self.j2])
        np.savetxt(path, arr, delimiter=",", header="theta,j,j1,j2", comments="", fmt="%.17g")


def kl_profile(params: ModelParams, n_points: int = 201) -> KlProfile:
    """Tabulate J, J', J'' over the search window and locate the minimum."""
    if n_points < 2:
        raise ValidationError("n_points must be at least 2")
    lo, hi = params.theta_window
    grid = np.linspace(lo, hi, n_points)
    j = np.array([kl_divergence(params, t) for t in grid])
    j1 = np.array([kl_derivative(params, t) for t in grid])
    j2 = np.array([
        math.inf if t == params.theta0 else kl_second_derivative(params, t) for t in grid
    ])
    theta_hat = find_pseudo_true(params)
    curvature = math.inf if params.h == 0.0 else kl_second_derivative(params, theta_hat)
    return KlProfile(grid=grid, j=j, j1=j1, j2=j2, theta_hat=theta_hat, curvature_hat=curvature)


def _check_theta(params: ModelParams, theta: float) -> None:
    lo, hi = params.theta_window
    if not lo <= theta <= hi:
        raise ValidationError(f"theta = {theta} outside the search window [{lo}, {hi}]")
