import math

import numpy as np
import pytest
from scipy.integrate import quad

from cuspmle import (
    ModelParams,
    ValidationError,
    admissible_threshold,
    contamination_admissible,
    cumulative_psi,
    psi,
    real_intensity,
    real_intensity_integral,
    theoretical_intensity,
    theoretical_intensity_integral,
)

from conftest import reference_params


class TestPsi:
    def test_boundary_and_plateau(self):
        assert psi(0.0, 0.25, 0.5) == 0.0
        assert psi(-1.0, 0.3, 0.2) == 0.0
        assert psi(0.5, 0.25, 0.5) == 1.0
        assert psi(1.0, 0.25, 0.5) == 1.0

    def test_direct_value(self):
        assert psi(0.25, 0.25, 0.5) == pytest.approx(0.5**0.25, abs=1e-15)

    def test_vectorized_matches_scalar(self):
        x = np.linspace(-0.2, 0.8, 101)
        vec = psi(x, 0.25, 0.5)
        assert vec.shape == x.shape
        for xi, vi in zip(x, vec):
            # vectorized pow may differ from scalar pow in the last ulp
            assert psi(float(xi), 0.25, 0.5) == pytest.approx(vi, rel=1e-15, abs=0.0)

    @pytest.mark.parametrize("kappa", [0.05, 0.25, 0.45])
    def test_nondecreasing_with_hoelder_modulus(self, kappa):
        delta = 0.5
        x = np.linspace(-0.5, 1.0, 4001)
        v = psi(x, kappa, delta)
        assert np.all(np.diff(v) >= 0.0)
        # continuity with modulus |x-y|^kappa / delta^kappa (no linear modulus exists)
        mesh = x[1] - x[0]
        assert np.max(np.diff(v)) <= (mesh / delta) ** kappa * (1.0 + 1e-12)

    def test_no_lipschitz_constant_at_zero(self):
        # difference quotient over [x, 2x] must blow up as x -> 0
        quotients = []
        for x in (1e-2, 1e-4, 1e-6, 1e-8):
            q = (psi(2 * x, 0.25, 0.5) - psi(x, 0.25, 0.5)) / x
            quotients.append(q)
        assert all(b > 2 * a for a, b in zip(quotients, quotients[1:]))

    def test_rejects_bad_kappa_delta(self):
        with pytest.raises(ValidationError):
            psi(0.1, 0.5, 0.5)
        with pytest.raises(ValidationError):
            psi(0.1, 0.25, 0.0)


class TestIntensities:
    def test_theoretical_values(self):
        p = reference_params(0.5)
        assert theoretical_intensity(p, 2.0, 2.0) == p.lambda0
        assert theoretical_intensity(p, 2.0, 2.5) == p.S + p.lambda0
        assert theoretical_intensity(p, 2.0, 2.25) == pytest.approx(1.0 + 0.5**0.25, abs=1e-15)

    def test_real_values(self):
        p = reference_params(0.5)
        t = np.linspace(0.0, p.tau, 101)
        lam = real_intensity(p, t)
        assert np.all(lam[t <= p.theta0] == p.lambda0)
        assert np.all(lam[t >= p.theta0 + p.delta] == p.lambda_plus)

    def test_cancelled_signal_is_flat_noise(self):
        p = reference_params(-1.0)  # h = -S
        t = np.linspace(0.0, p.tau, 101)
        assert np.all(real_intensity(p, t) == p.lambda0)

    def test_bounds(self):
        for h in (-0.4, 0.0, 0.7):
            p = reference_params(h)
            t = np.linspace(0.0, p.tau, 501)
            lam = theoretical_intensity(p, 1.7, t)
            lam_s = real_intensity(p, t)
            low = min(p.lambda0, p.lambda_plus)
            high = max(p.lambda0, p.S + p.lambda0, p.lambda_plus)
            assert np.all((lam >= low - 1e-15) & (lam <= high + 1e-15))
            assert np.all((lam_s >= low - 1e-15) & (lam_s <= high + 1e-15))

    @pytest.mark.parametrize("h", [-0.4, 0.0, 0.5])
    def test_integral_closed_form_vs_quadrature(self, h):
        p = reference_params(h)
        theta = 1.73
        want = quad(lambda t: theoretical_intensity(p, theta, t), 0.0, p.tau,
                    points=[theta, theta + p.delta], limit=200, epsabs=1e-12)[0]
        got = theoretical_intensity_integral(p, theta, 0.0, p.tau)
        assert got == pytest.approx(want, abs=1e-10)
        # closed form: lam0 tau + S (delta/(kappa+1) + tau - theta - delta)
        explicit = p.lambda0 * p.tau + p.S * (p.delta / (p.kappa + 1) + p.tau - theta - p.delta)
        assert got == pytest.approx(explicit, abs=1e-12)

        want_r = quad(lambda t: real_intensity(p, t), 0.0, p.tau,
                      points=[p.theta0, p.theta0 + p.delta], limit=200, epsabs=1e-12)[0]
        assert real_intensity_integral(p, 0.0, p.tau) == pytest.approx(want_r, abs=1e-10)

    def test_cumulative_psi_pieces(self):
        assert cumulative_psi(-1.0, 0.25, 0.5) == 0.0
        assert cumulative_psi(0.5, 0.25, 0.5) == pytest.approx(0.5 / 1.25, abs=1e-15)
        assert cumulative_psi(2.0, 0.25, 0.5) == pytest.approx(0.5 / 1.25 + 1.5, abs=1e-15)


class TestAdmissibility:
    def test_zero_and_positive_h_admissible(self):
        ok, thr = contamination_admissible(1.0, 1.0, 0.0)
        assert ok and thr < 0.0
        ok, _ = contamination_admissible(1.0, 1.0, 1.0)
        assert ok

    def test_reference_threshold(self):
        # S = lam0 = 1: threshold is 1/ln(2) - 2
        thr = admissible_threshold(1.0, 1.0)
        assert thr == pytest.approx(1.0 / math.log(2.0) - 2.0, abs=1e-14)
        assert contamination_admissible(1.0, 1.0, -0.5)[0]
        assert not contamination_admissible(1.0, 1.0, -0.6)[0]

    @pytest.mark.parametrize("S", [0.1, 0.7, 1.0, 3.0, 25.0])
    @pytest.mark.parametrize("lam0", [0.05, 0.5, 1.0, 8.0])
    def test_threshold_interval(self, S, lam0):
        thr = admissible_threshold(S, lam0)
        assert -S < thr < 0.0


class TestModelParams:
    def test_window_derivation(self):
        p = reference_params(0.5)
        assert p.theta_window == (0.5, 3.5)
        assert p.lambda_plus == 2.5

    def test_explicit_window_must_match(self):
        with pytest.raises(ValidationError):
            ModelParams(S=1.0, h=0.0, lambda0=1.0, kappa=0.25, delta=0.5, tau=5.0,
                        theta0=2.0, theta0_window=(1.0, 3.0), theta_window=(0.4, 3.5))

    @pytest.mark.parametrize("kappa", [0.0, 0.5, 0.75, -0.1])
    def test_kappa_open_interval(self, kappa):
        with pytest.raises(ValidationError):
            ModelParams(S=1.0, h=0.0, lambda0=1.0, kappa=kappa, delta=0.5, tau=5.0,
                        theta0=2.0, theta0_window=(1.0, 3.0))

    def test_nonpositive_plateau_rejected(self):
        with pytest.raises(ValidationError):
            reference_params(-2.0)  # S + h + lam0 = 0

    def test_theta0_must_be_interior(self):
        with pytest.raises(ValidationError):
            ModelParams(S=1.0, h=0.0, lambda0=1.0, kappa=0.25, delta=0.5, tau=5.0,
                        theta0=3.0, theta0_window=(1.0, 3.0))

    def test_window_must_fit_horizon(self):
        # beta + delta = 3.5 > tau - delta = 3.4
        with pytest.raises(ValidationError):
            ModelParams(S=1.0, h=0.0, lambda0=1.0, kappa=0.25, delta=0.5, tau=3.9,
                        theta0=2.0, theta0_window=(1.0, 3.0))
        # equality of the interval endpoints is still a subset for open intervals
        ModelParams(S=1.0, h=0.0, lambda0=1.0, kappa=0.25, delta=0.5, tau=4.0,
                    theta0=2.0, theta0_window=(1.0, 3.0))

    def test_dict_round_trip(self):
        p = reference_params(-0.3)
        q = ModelParams.from_dict(p.to_dict())
        assert q == p

    def test_missing_field_named(self):
        d = reference_params(0.1).to_dict()
        del d["kappa"]
        with pytest.raises(ValidationError, match="kappa"):
            ModelParams.from_dict(d)
