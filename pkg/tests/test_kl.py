import math

import numpy as np
import pytest

from cuspmle import (
    NumericalError,
    ValidationError,
    find_pseudo_true,
    gamma_kappa,
    int2p_ratio,
    kl_derivative,
    kl_divergence,
    kl_profile,
    kl_second_derivative,
    limit_constants,
    real_intensity,
    theoretical_intensity,
)

from conftest import midpoint_integral, reference_params

# frozen via the oracle chain in TestLimitConstants::test_b_oracle_chain
B_REFERENCE = 0.4981625950723869
THETA_HAT_REFERENCE = 1.9756318292684227


def kl_grid_minimizer(params, lo, hi, coarse=1e-3, fine=1e-5):
    """Independent oracle: minimize quadrature J on a coarse-to-fine grid."""
    grid = np.arange(lo, hi + coarse / 2, coarse)
    vals = [kl_divergence(params, t) for t in grid]
    center = grid[int(np.argmin(vals))]
    lo2 = max(lo, center - 2 * coarse)
    hi2 = min(hi, center + 2 * coarse)
    grid2 = np.arange(lo2, hi2 + fine / 2, fine)
    vals2 = [kl_divergence(params, t) for t in grid2]
    return float(grid2[int(np.argmin(vals2))])


class TestDivergence:
    def test_zero_iff_identical(self, params_zero):
        assert kl_divergence(params_zero, 2.0) == pytest.approx(0.0, abs=1e-12)
        assert kl_divergence(params_zero, 1.8) > 1e-4

    def test_nonnegative_on_grid(self, params_pos):
        for t in np.linspace(0.5, 3.5, 31):
            assert kl_divergence(params_pos, t) >= 0.0

    def test_midpoint_oracle(self, params_pos):
        # brute-force Riemann sum over [theta0, tau] at 1e6 points
        p = params_pos
        theta = p.theta0

        def f(t):
            lam = theoretical_intensity(p, theta, t)
            lam_s = real_intensity(p, t)
            return lam - lam_s - lam_s * np.log(lam / lam_s)

        want = midpoint_integral(f, min(theta, p.theta0), p.tau)
        assert kl_divergence(p, theta) == pytest.approx(want, abs=1e-7)

    def test_theta_outside_window_rejected(self, params_pos):
        with pytest.raises(ValidationError):
            kl_divergence(params_pos, 0.3)


class TestDerivative:
    def test_flat_branches(self, params_pos):
        p = params_pos
        left = p.lambda0 * math.log1p(p.S / p.lambda0) - p.S
        right = p.lambda_plus * math.log1p(p.S / p.lambda0) - p.S
        assert left < 0.0 < right
        for t in (0.5, 1.0, 1.5):
            assert kl_derivative(p, t) == pytest.approx(left, abs=1e-14)
        for t in (2.5, 3.0, 3.5):
            assert kl_derivative(p, t) == pytest.approx(right, abs=1e-14)

    @pytest.mark.parametrize("h", [-0.3, 0.0, 0.5])
    def test_value_at_theta0_is_a_times_h(self, h):
        p = reference_params(h)
        a = 1.0 - p.lambda0 / p.S * math.log1p(p.S / p.lambda0)
        assert kl_derivative(p, p.theta0) == pytest.approx(a * h, abs=1e-8)

    @pytest.mark.parametrize("h", [-0.3, 0.5])
    def test_branch_continuity(self, h):
        p = reference_params(h)
        eps = 1e-10
        for boundary in (p.theta0 - p.delta, p.theta0, p.theta0 + p.delta):
            below = kl_derivative(p, boundary - eps)
            above = kl_derivative(p, boundary + eps)
            assert below == pytest.approx(above, abs=1e-8)

    @pytest.mark.parametrize("h", [-0.3, 0.5])
    def test_finite_differences_of_quadrature(self, h):
        # spot-check here; the acceptance suite sweeps 200 points
        p = reference_params(h)
        step = 1e-4
        for theta in (1.2, 1.6, 1.9, 2.1, 2.4, 3.1):
            fd = (kl_divergence(p, theta + step) - kl_divergence(p, theta - step)) / (2 * step)
            assert kl_derivative(p, theta) == pytest.approx(fd, abs=1e-6)

    def test_monotone_on_cusp_interval(self, params_pos):
        p = params_pos
        grid = np.linspace(p.theta0 - p.delta, p.theta0 + p.delta, 301)
        vals = [kl_derivative(p, t) for t in grid]
        assert np.all(np.diff(vals) >= -1e-12)


class TestSecondDerivative:
    def test_zero_outside(self, params_pos):
        p = params_pos
        assert kl_second_derivative(p, p.theta0 - 2 * p.delta) == 0.0
        assert kl_second_derivative(p, p.theta0 + 2 * p.delta) == 0.0

    def test_positive_inside(self, params_pos):
        p = params_pos
        for t in (1.55, 1.9, 2.1, 2.45):
            assert kl_second_derivative(p, t) > 0.0

    def test_diverges_at_theta0(self, params_pos):
        p = params_pos
        with pytest.raises(ValidationError):
            kl_second_derivative(p, p.theta0)
        gaps = [1e-1, 1e-2, 1e-3, 1e-4]
        vals = [kl_second_derivative(p, p.theta0 - g) for g in gaps]
        assert all(b > a for a, b in zip(vals, vals[1:]))
        assert vals[-1] > 10.0

    @pytest.mark.parametrize("theta", [1.6, 1.9, 2.1, 2.4])
    def test_finite_difference_of_derivative(self, theta, params_pos):
        p = params_pos
        step = 1e-5
        fd = (kl_derivative(p, theta + step) - kl_derivative(p, theta - step)) / (2 * step)
        assert kl_second_derivative(p, theta) == pytest.approx(fd, rel=1e-4)


class TestPseudoTrue:
    def test_h_zero_exact(self, params_zero):
        assert find_pseudo_true(params_zero) == params_zero.theta0

    def test_positive_h_left_of_theta0(self, params_pos):
        p = params_pos
        th = find_pseudo_true(p)
        assert p.theta0 - p.delta < th < p.theta0
        assert abs(kl_derivative(p, th)) < 1e-10
        assert th == pytest.approx(THETA_HAT_REFERENCE, abs=1e-11)

    def test_negative_h_right_of_theta0(self, params_neg):
        p = params_neg
        th = find_pseudo_true(p)
        assert p.theta0 < th < p.theta0 + p.delta
        assert abs(kl_derivative(p, th)) < 1e-10

    @pytest.mark.parametrize("h", [-0.3, 0.5])
    def test_grid_minimization_oracle(self, h):
        p = reference_params(h)
        th = find_pseudo_true(p)
        lo, hi = (p.theta0 - p.delta, p.theta0) if h > 0 else (p.theta0, p.theta0 + p.delta)
        oracle = kl_grid_minimizer(p, lo, hi)
        assert th == pytest.approx(oracle, abs=1e-5)

    def test_inadmissible_h_rejected(self):
        p = reference_params(-0.7)
        with pytest.raises(ValidationError, match="threshold"):
            find_pseudo_true(p)


class TestGammaKappa:
    def test_tail_decay(self):
        kappa = 0.25

        def sq(v):
            return ((v - 1.0) ** kappa - v**kappa) ** 2

        assert sq(100.0) < 1e-3 * sq(2.0)

    def test_continuity_in_kappa(self):
        grid = np.linspace(0.05, 0.45, 9)
        for k in grid:
            assert abs(gamma_kappa(k) - gamma_kappa(k + 1e-4)) < 1e-2

    def test_monte_carlo_variance_oracle(self):
        # discretized two-sided Wiener integral of (v-1)_+^k - v_+^k, divided
        # by gamma_kappa, must have unit variance
        kappa = 0.25
        gk = gamma_kappa(kappa)
        rng = np.random.default_rng(1234)
        dv = 1e-3
        v = np.arange(0.0, 80.0, dv) + dv / 2
        kernel = np.where(v > 1.0, (np.clip(v - 1.0, 0.0, None)) ** kappa, 0.0) - v**kappa
        n_draws = 3000
        draws = np.empty(n_draws)
        for start in range(0, n_draws, 250):
            z = rng.standard_normal((v.size, 250))
            draws[start:start + 250] = kernel @ z * math.sqrt(dv)
        var = np.var(draws / gk)
        mc_std = math.sqrt(2.0 / n_draws)  # Var of a variance estimate of N(0,1)
        assert abs(var - 1.0) < 3 * mc_std

    def test_rejects_bad_kappa(self):
        with pytest.raises(ValidationError):
            gamma_kappa(0.5)


class TestLimitConstants:
    def test_a_closed_form(self, params_pos):
        c = limit_constants(params_pos)
        assert c.A == pytest.approx(1.0 - math.log(2.0), abs=1e-14)
        assert c.hurst == 0.75
        assert c.b > 0.0

    @pytest.mark.parametrize("S", [0.2, 1.0, 5.0])
    @pytest.mark.parametrize("lam0", [0.1, 1.0, 4.0])
    def test_a_in_unit_interval(self, S, lam0):
        a = 1.0 - lam0 / S * math.log1p(S / lam0)
        assert 0.0 < a < 1.0

    def test_b_regression_constant(self, params_pos):
        c = limit_constants(params_pos)
        assert c.b == pytest.approx(B_REFERENCE, abs=1e-9)

    def test_b_oracle_chain(self, params_pos):
        # independent chain: grid-minimized theta_hat, finite-difference
        # curvature, Riemann-sum front normalizer
        p = params_pos
        th = kl_grid_minimizer(p, p.theta0 - p.delta, p.theta0)
        step = 1e-5
        curv = (kl_derivative(p, th + step) - kl_derivative(p, th - step)) / (2 * step)
        dv = 1e-6
        v = np.arange(0.0, 400.0, dv) + dv / 2
        kernel = np.where(v > 1.0, (np.clip(v - 1.0, 0.0, None)) ** 0.25, 0.0) - v**0.25
        gk = math.sqrt(np.sum(kernel**2) * dv)
        lam_here = float(real_intensity(p, th))
        b = (p.S * gk * math.sqrt(lam_here) / (p.lambda0 * p.delta**p.kappa * curv)) ** (
            2.0 / (3.0 - 2.0 * p.kappa)
        )
        assert b == pytest.approx(B_REFERENCE, rel=2e-4)

    def test_h_zero_rejected(self, params_zero):
        with pytest.raises(ValidationError):
            limit_constants(params_zero)


class TestInt2p:
    def test_bounded_over_gaps(self, params_pos):
        p = params_pos
        ratios = []
        for gap in (1e-1, 1e-2, 1e-3, 1e-4):
            for pw in (1.0, 2.0):
                ratios.append(int2p_ratio(p, 2.0, 2.0 + gap, pw))
        assert max(ratios) / min(ratios) < 10.0

    def test_symmetric(self, params_pos):
        a = int2p_ratio(params_pos, 1.8, 2.1, 1.0)
        b = int2p_ratio(params_pos, 2.1, 1.8, 1.0)
        assert a == pytest.approx(b, rel=1e-10)

    def test_continuous_in_kappa(self):
        gap = 1e-2
        vals = []
        for kappa in (0.2, 0.25, 0.3):
            p = reference_params(0.5)
            q = type(p)(S=p.S, h=p.h, lambda0=p.lambda0, kappa=kappa, delta=p.delta,
                        tau=p.tau, theta0=p.theta0, theta0_window=p.theta0_window)
            vals.append(int2p_ratio(q, 2.0, 2.0 + gap, 1.0))
        assert max(vals) / min(vals) < 2.0

    def test_equal_thetas_rejected(self, params_pos):
        with pytest.raises(ValidationError):
            int2p_ratio(params_pos, 2.0, 2.0, 1.0)


class TestProfile:
    @pytest.mark.parametrize("h", [-0.3, 0.5])
    def test_profile_invariants(self, h):
        p = reference_params(h)
        prof = kl_profile(p, 201)
        signs = np.sign(prof.j1)
        changes = np.sum(np.abs(np.diff(signs)) > 0)
        assert changes == 1
        # the sign change must bracket theta_hat
        idx = int(np.flatnonzero(np.diff(signs))[0])
        assert prof.grid[idx] <= prof.theta_hat <= prof.grid[idx + 1]
        finite = np.isfinite(prof.j2)
        assert np.all(prof.j2[finite] >= 0.0)
        outside = (prof.grid < p.theta0 - p.delta) | (prof.grid > p.theta0 + p.delta)
        assert np.all(prof.j2[outside] == 0.0)
        nearest = prof.grid[np.argmin(np.abs(prof.grid - prof.theta_hat))]
        assert prof.grid[np.argmin(prof.j)] == nearest

    def test_quadratic_envelope(self, params_pos):
        p = params_pos
        prof = kl_profile(p, 151)
        th, j_hat = prof.theta_hat, kl_divergence(p, find_pseudo_true(p))
        mask = np.abs(prof.grid - th) > 1e-3
        ratio = (prof.j[mask] - j_hat) / (prof.grid[mask] - th) ** 2
        assert ratio.min() > 1e-3
        assert ratio.max() < 1e3

    def test_infinity_sentinel_at_theta0(self, params_pos):
        prof = kl_profile(params_pos, 301)  # grid hits 2.0 exactly
        at_theta0 = prof.grid == params_pos.theta0
        assert at_theta0.sum() == 1
        assert np.isinf(prof.j2[at_theta0][0])
