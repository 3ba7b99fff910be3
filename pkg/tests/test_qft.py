import math
import time
import warnings

import numpy as np
import pytest
from scipy import special

from casimir import ConvergenceError, DomainError
from casimir import qft
from casimir.qft import (
    KAPPA_ASYMPTOTIC,
    energy_density,
    energy_density_estimate,
    energy_density_mc,
    green_coefficients,
    green_function,
    green_function_plateau,
    large_kappa_exponent,
    potential,
    q_factor,
    q_minus_two_kappa,
    q_sign_changes,
)

KAPPA_GRID = [0.2, 1.0, 3.0, 10.0]
SOURCE_GRID = [1.1, 2.0, 5.0]


def q_scipy(k):
    ai_x, aip_x, bi_x, bip_x = special.airy(k * k)
    ai_y, _, bi_y, _ = special.airy(k * k - 1)
    return k + (aip_x * bi_y - ai_y * bip_x) / (ai_x * bi_y - ai_y * bi_x)


def ramp_scipy(co, z):
    ai, aip, bi, bip = special.airy(co.kappa**2 - 1 + z)
    return co.A * ai + co.B * bi, co.A * aip + co.B * bip


def u(z):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return energy_density(z)


class TestPotential:
    def test_values(self):
        assert potential(0.0) == -1.0
        assert potential(1.0) == 0.0
        assert potential(7.0) == 0.0
        assert potential(0.25) == -0.75
        assert potential(1 - 1e-15) == pytest.approx(0.0, abs=1e-14)

    def test_domain(self):
        with pytest.raises(DomainError):
            potential(-0.1)


class TestQ:
    def test_kappa_one_from_exact_origin_values(self):
        ai0 = 1 / (3 ** (2 / 3) * math.gamma(2 / 3))
        bi0 = 1 / (3 ** (1 / 6) * math.gamma(2 / 3))
        ai1, aip1, bi1, bip1 = special.airy(1.0)
        ref = 1 + (aip1 * bi0 - ai0 * bip1) / (ai1 * bi0 - ai0 * bi1)
        assert q_factor(1.0) == pytest.approx(ref, rel=1e-14)
        assert q_factor(1.0) == pytest.approx(2.2415, abs=5e-5)

    @pytest.mark.parametrize("k", [0.05, 0.2, 0.7, 1.0, 1.5, 3.0, 6.0, 10.0])
    def test_against_scipy(self, k):
        assert q_factor(k) == pytest.approx(q_scipy(k), rel=1e-12)

    def test_branch_handover(self):
        k = KAPPA_ASYMPTOTIC
        direct = qft._matching_ratio(k)[0] - k
        series = qft._bi_log_derivative_excess(k)
        assert direct == pytest.approx(series, rel=1e-9)

    @pytest.mark.parametrize("k", [25.0, 50.0, 100.0, 400.0])
    def test_large_kappa_series(self, k):
        # Riccati expansion of Bi'/Bi: sqrt(x) - 1/(4x) - 5/(32 x^(5/2)) - ...
        approx = -1 / (4 * k**2) - 5 / (32 * k**5)
        assert q_minus_two_kappa(k) == pytest.approx(approx, rel=1e-6)

    def test_limit_two_kappa(self):
        vals = [abs(q_factor(k) / (2 * k) - 1) for k in (5, 10, 20, 40, 80)]
        assert all(b < a for a, b in zip(vals, vals[1:]))
        assert q_factor(10.0) / 20 - 1 < 1e-6

    def test_relative_excess_at_ten(self):
        # the approach is algebraic: Q/(2k) - 1 ~ -1/(8 k^3)
        assert q_factor(10.0) / 20 - 1 == pytest.approx(-1.2507607543876e-4, rel=1e-9)

    def test_positive_no_pole(self):
        ks = np.linspace(1e-3, 10.0, 4000)
        assert q_sign_changes(ks) == []
        assert min(q_factor(k) for k in ks[::10]) > 0.9

    def test_sign_monitor_reports(self, monkeypatch):
        monkeypatch.setattr(qft, "q_factor", lambda k: k - 1.0)
        assert qft.q_sign_changes([0.5, 0.9, 1.1, 2.0]) == [(0.9, 1.1)]

    def test_pole_guard(self, monkeypatch):
        ax, ay, d, w = qft._scaled_pair(1.0)
        zero = ax._replace(ai=0.0)
        monkeypatch.setattr(qft, "_scaled_pair", lambda k: (zero, ay._replace(ai=0.0), d, w))
        with pytest.raises(ConvergenceError):
            qft.q_factor(1.0)

    def test_exponent(self):
        assert large_kappa_exponent() == pytest.approx(-4.0, abs=0.05)

    @pytest.mark.parametrize("k", [0.0, -1.0, math.inf, math.nan])
    def test_domain(self, k):
        with pytest.raises(DomainError):
            q_factor(k)


class TestCoefficients:
    @pytest.mark.parametrize("k", KAPPA_GRID)
    @pytest.mark.parametrize("zs", SOURCE_GRID)
    def test_linear_system(self, k, zs):
        assert max(green_coefficients(k, zs).residuals()) < 1e-10

    @pytest.mark.parametrize("k", KAPPA_GRID)
    @pytest.mark.parametrize("zs", SOURCE_GRID)
    def test_solved_matches_closed_form(self, k, zs):
        co = green_coefficients(k, zs)
        a, b, c, Q = qft._closed_coefficients(k, zs)
        assert co.a_scaled == pytest.approx(a, rel=1e-10)
        assert co.b_scaled == pytest.approx(b, rel=1e-10)
        assert co.C == pytest.approx(c, rel=1e-10)
        assert co.Q == Q

    def test_dirichlet_example_unscaled(self):
        co = green_coefficients(1.3, 2.0)
        ai, _, bi, _ = special.airy(1.3**2 - 1)
        assert abs(co.A * ai + co.B * bi) < 1e-10 * abs(co.A * ai)

    def test_printed_prefactor_inconsistent(self):
        k, zs = 3.0, 2.0
        co = green_coefficients(k, zs)
        E = math.exp(-k * (zs - 1))
        printed = -(0.5 - 1 / co.Q) * E
        assert abs(printed - co.C) > 1e-3 * abs(co.C)

    def test_large_kappa_pattern(self):
        co = green_coefficients(10.0, 2.0)
        assert co.A < -1e200
        assert 0 < co.B < 1e-200
        assert abs(co.C) < 1e-8
        lead = math.sqrt(math.pi / 10) * math.exp(-10 * 2.0 + 10 - 10 * 1.0)
        # magnitudes follow the leading asymptotics in log scale
        assert math.log(-co.A) == pytest.approx(math.log(lead) + 2 / 3 * 99**1.5, rel=1e-3)

    @pytest.mark.parametrize("k", [0.5, 2.0])
    def test_source_scaling(self, k):
        a, b = green_coefficients(k, 1.5), green_coefficients(k, 3.0)
        f = math.exp(-k * 1.5)
        for x, y in ((a.A, b.A), (a.B, b.B), (a.C, b.C)):
            assert y == pytest.approx(x * f, rel=1e-12)

    def test_domain(self):
        with pytest.raises(DomainError):
            green_coefficients(1.0, 1.0)
        with pytest.raises(DomainError):
            green_coefficients(-1.0, 2.0)


class TestGreenFunction:
    def test_dirichlet_wall(self):
        for k, zs in [(0.3, 1.5), (1.3, 2.0), (4.0, 1.2)]:
            scale = abs(green_function(k, 0.5, zs)) + abs(green_function(k, 1.0, zs))
            assert abs(green_function(k, 0.0, zs)) < 1e-12 * scale

    def test_decay(self):
        assert abs(green_function(1.0, 60.0, 2.0)) < 1e-24
        vals = [abs(green_function(1.0, z, 2.0)) for z in (3, 6, 12, 24)]
        assert all(b < a for a, b in zip(vals, vals[1:]))

    @pytest.mark.parametrize("k", [0.4, 1.3, 3.0])
    def test_continuity_at_knee(self, k):
        zs = 2.0
        co = green_coefficients(k, zs)
        left, dleft = ramp_scipy(co, 1.0)
        E = math.exp(-k * (zs - 1))
        right = E / (2 * k) + co.C
        dright = E / 2 - k * co.C
        assert abs(left - right) < 1e-10 * max(1.0, abs(right))
        assert abs(dleft - dright) < 1e-8 * max(1.0, abs(dright))
        assert green_function(k, 1 - 1e-12, zs) == pytest.approx(green_function(k, 1.0, zs), rel=1e-9)

    def test_ramp_against_scipy(self):
        co = green_coefficients(1.3, 2.0)
        for z in (0.1, 0.5, 0.9):
            assert green_function(1.3, z, 2.0) == pytest.approx(ramp_scipy(co, z)[0], rel=1e-11)

    def test_plateau_forms_agree(self):
        for k in (0.2, 1.0, 3.0, 10.0):
            for z in (1.0, 1.3, 2.5, 6.0):
                for zs in (1.1, 2.0, 5.0):
                    a = green_function(k, z, zs)
                    b = green_function_plateau(k, z, zs)
                    assert abs(a - b) < 1e-12 * max(abs(a), 1e-300) + 1e-300

    def test_reciprocity(self):
        for k in (0.2, 1.0, 3.0):
            for z, zs in [(1.2, 3.0), (2.0, 5.0), (1.05, 1.5)]:
                assert green_function_plateau(k, z, zs) == pytest.approx(
                    green_function_plateau(k, zs, z), rel=1e-12)
                assert green_function(k, z, zs) == pytest.approx(green_function(k, zs, z), rel=1e-12)

    def test_domain(self):
        with pytest.raises(DomainError):
            green_function(1.0, -0.5, 2.0)
        with pytest.raises(DomainError):
            green_function_plateau(1.0, 0.5, 2.0)


class TestEnergyDensity:
    def test_frozen_values(self):
        # frozen from this implementation
        assert u(1.5) == pytest.approx(-7.304016843428e-4, rel=1e-8)
        assert u(3.0) == pytest.approx(-6.763398660010e-5, rel=1e-8)
        assert u(10.0) == pytest.approx(-6.094176588639e-7, rel=1e-8)

    @pytest.mark.parametrize("z", [1.5, 3.0])
    def test_monte_carlo_oracle(self, z):
        mean, se = energy_density_mc(z, n_samples=200_000, seed=3)
        assert abs(mean - u(z)) < 4 * se
        assert se < 0.02 * abs(u(z))

    def test_large_z_asymptote(self):
        # m(0) = 1 gives u -> -1/(16 pi^2 (z-1)^4)
        for h in (1000.0, 10000.0):
            assert u(1 + h) * h**4 * 16 * math.pi**2 == pytest.approx(-1.0, abs=5.0 / h)

    def test_tolerance_respected(self):
        est = energy_density_estimate(2.0)
        assert est.abs_error_est < 1e-9 * abs(est.value)
        assert est.extras["kappa_max"] == 50.0
        assert est.extras["tail_bound"] < 1e-30

    def test_integrand_vanishes(self):
        vals = [abs(qft.energy_integrand(k, 1.01)) for k in (200.0, 1000.0, 4000.0)]
        assert all(b < a for a, b in zip(vals, vals[1:]))
        assert vals[-1] < 1e-30
        assert qft.energy_integrand(0.0, 2.0) == 0.0

    def test_negative_beyond_sign_change(self):
        zs = np.linspace(1.2, 10.0, 45)
        assert all(u(z) < 0 for z in zs)

    def test_positive_near_knee(self):
        # large kappa dominates near the knee, where 1/kappa - 2/Q < 0
        assert u(1.05) > 0
        assert u(1.1) > 0

    def test_abs_decreasing_beyond_peak(self):
        zs = np.linspace(1.45, 10.0, 40)
        vals = [abs(u(z)) for z in zs]
        assert all(b < a for a, b in zip(vals, vals[1:]))

    def test_negative_on_open_interval(self):
        zs = np.concatenate([[1.01, 1.05, 1.1], np.linspace(1.2, 10.0, 12)])
        assert all(u(z) < 0 for z in zs)

    def test_abs_decreasing_from_1_2(self):
        zs = np.linspace(1.2, 10.0, 45)
        vals = [abs(u(z)) for z in zs]
        assert all(b < a for a, b in zip(vals, vals[1:]))

    def test_decay_ratio(self):
        assert abs(u(10.0)) < 1e-6 * abs(u(1.5))

    def test_slow_tail_warning(self):
        with pytest.warns(RuntimeWarning, match="slowly decaying"):
            energy_density(1.02)

    @pytest.mark.parametrize("z", [1.0, 0.5])
    def test_domain(self, z):
        with pytest.raises(DomainError):
            energy_density(z)

    def test_runtime(self):
        t = time.perf_counter()
        for z in np.linspace(1.1, 10.0, 30):
            u(z)
        assert time.perf_counter() - t < 10.0
