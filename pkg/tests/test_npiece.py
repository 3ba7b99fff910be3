import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize

from casimir import DomainError
from casimir.npiece import (
    NPieceString,
    det_m_minus_one,
    energy_closed_x0,
    energy_finite_T,
    energy_zero_T,
    integrand,
    lambda_pm,
    npiece_record,
    numerator_direct,
    power_sum,
    scaling_f,
    scaling_fit,
)

X_GRID = np.arange(0.05, 0.4501, 0.05)


class TestTypes:
    def test_alpha(self):
        c = NPieceString(3, 0.5)
        assert c.alpha == pytest.approx(1.0 / 3.0)
        assert c.d == pytest.approx(1.0 - c.alpha**2, rel=1e-15)
        assert NPieceString(2, 1.0).alpha == 0.0

    def test_phase(self):
        assert NPieceString(4, 0.2, 2.0).phase(3.0) == pytest.approx(1.5)

    @pytest.mark.parametrize("N,x", [(0, 0.5), (2.5, 0.5), (2, -0.1), (2, 1.2)])
    def test_invalid(self, N, x):
        with pytest.raises(DomainError):
            NPieceString(N, x)


class TestLambda:
    def test_q0_double(self):
        for a in (0.0, 0.3, 0.9):
            lp, lm = lambda_pm(a, 0.0)
            assert lp == pytest.approx(1 - a * a, rel=1e-15)
            assert lm == pytest.approx(1 - a * a, rel=1e-15)

    def test_alpha0(self):
        q = np.linspace(0, 5, 11)
        lp, lm = lambda_pm(0.0, q)
        np.testing.assert_allclose(lp, np.exp(q), rtol=1e-14)
        np.testing.assert_allclose(lm, np.exp(-q), rtol=1e-14)

    def test_alpha1(self):
        q = np.linspace(0.1, 5, 11)
        lp, lm = lambda_pm(1.0, q)
        np.testing.assert_allclose(lp, 4 * np.sinh(q / 2) ** 2, rtol=1e-14)
        assert np.all(lm == 0.0)

    @given(st.floats(0.0, 0.999), st.floats(0.0, 30.0))
    def test_product_and_sum(self, a, q):
        lp, lm = lambda_pm(a, q)
        assert lp >= 0 and lm >= 0
        assert lp * lm == pytest.approx((1 - a * a) ** 2, rel=1e-12, abs=1e-300)
        assert lp + lm == pytest.approx(2 * (math.cosh(q) - a * a), rel=1e-12)

    def test_literal_formula(self):
        a, q = 0.4, 1.3
        c = math.cosh(q) - a * a
        r = math.sqrt(c * c - (1 - a * a) ** 2)
        assert lambda_pm(a, q) == pytest.approx((c + r, c - r), rel=1e-13)

    def test_negative_q(self):
        with pytest.raises(DomainError):
            lambda_pm(0.5, -1.0)


class TestIntegrand:
    @pytest.mark.parametrize("N", [2, 3, 5])
    @pytest.mark.parametrize("x", [0.05, 0.3, 0.8])
    def test_against_power_sum(self, N, x):
        c = NPieceString(N, x)
        q = np.array([0.05, 0.3, 1.0, 2.5, 6.0])
        direct = np.log(np.abs(numerator_direct(c.alpha, q, N) / (4 * np.sinh(N * q / 2) ** 2)))
        np.testing.assert_allclose(integrand(c, q), direct, rtol=1e-8, atol=1e-12)

    def test_power_sum_recurrence(self):
        lp, lm = 2.7, 0.3
        for N in range(0, 7):
            assert power_sum(lp + lm, lp * lm, N) == pytest.approx(lp**N + lm**N, rel=1e-13)

    def test_q0_limit(self):
        c = NPieceString(4, 0.2)
        assert integrand(c, 0.0) == pytest.approx(3 * math.log(c.d), rel=1e-15)
        assert integrand(c, 1e-7) == pytest.approx(3 * math.log(c.d), rel=1e-9)

    def test_x0_form(self):
        c = NPieceString(3, 0.0)
        q = np.array([0.2, 1.0, 4.0])
        want = 2 * np.log(2**2 * np.sinh(q / 2) ** 3 / np.sinh(1.5 * q))
        np.testing.assert_allclose(integrand(c, q), want, rtol=1e-13)
        assert integrand(c, 0.0) == -math.inf

    def test_branch_continuity(self):
        for x in (0.0, 0.01, 0.5):
            c = NPieceString(3, x)
            lo, hi = integrand(c, 1.0 - 1e-12), integrand(c, 1.0 + 1e-12)
            assert lo == pytest.approx(hi, rel=1e-9)

    def test_tail_decays_without_noise(self):
        c = NPieceString(3, 0.3)
        v = integrand(c, np.array([40.0, 80.0, 200.0]))
        assert np.all(v < 0)
        assert abs(v[2]) < 1e-80

    def test_negative_everywhere(self):
        for x in (0.01, 0.4, 0.95):
            c = NPieceString(4, x)
            assert np.all(integrand(c, np.linspace(0.0, 30.0, 301)) < 0)


class TestZeroT:
    @pytest.mark.parametrize("N", [2, 3, 4, 8])
    def test_closed_form(self, N):
        assert abs(energy_zero_T(NPieceString(N, 0.0)).value + (N * N - 1) / 6.0) < 1e-6

    def test_N3_value(self):
        assert energy_zero_T(NPieceString(3, 0.0)).value == pytest.approx(-4.0 / 3.0, abs=1e-9)
        assert energy_closed_x0(3) == pytest.approx(-4.0 / 3.0)

    def test_N1_and_uniform(self):
        for x in (0.0, 0.2, 0.7):
            assert abs(energy_zero_T(NPieceString(1, x)).value) < 1e-10
        for N in (2, 5):
            assert abs(energy_zero_T(NPieceString(N, 1.0)).value) < 1e-10

    def test_N1_numerically_zero(self):
        c = NPieceString(1, 0.3)
        assert np.max(np.abs(integrand(c, np.linspace(0, 20, 50)))) < 1e-14

    def test_monotone_in_N(self):
        vals = [energy_zero_T(NPieceString(N, 0.3)).value for N in range(2, 7)]
        assert all(v < 0 for v in vals)
        assert all(abs(b) > abs(a) for a, b in zip(vals, vals[1:]))

    def test_length_scaling(self):
        a = energy_zero_T(NPieceString(3, 0.3, 1.0)).value
        b = energy_zero_T(NPieceString(3, 0.3, 2.0)).value
        assert b == pytest.approx(a / 2, rel=1e-12)

    def test_near_zero_continuity(self):
        e = energy_zero_T(NPieceString(3, 1e-10)).value
        assert e == pytest.approx(-4.0 / 3.0, abs=1e-3)


class TestFiniteT:
    def test_low_T(self):
        for N, x in [(2, 0.3), (3, 0.1), (5, 0.7)]:
            c = NPieceString(N, x)
            e0 = energy_zero_T(c).value
            assert abs(energy_finite_T(c, 1e-3).value - e0) < 1e-4 * max(1.0, abs(e0))

    def test_vanishing_cases(self):
        assert energy_finite_T(NPieceString(4, 1.0), 0.5).value == 0.0
        assert energy_finite_T(NPieceString(1, 0.3), 0.5).value == 0.0

    def test_x0_static_term_diverges(self):
        with pytest.raises(DomainError):
            energy_finite_T(NPieceString(3, 0.0), 0.5)

    def test_x0_terms_match_simple_formula(self):
        # for x = 0 the summand equals 2 ln|2^N sinh^N(xi L / 2N) / (2 sinh(xi L / 2))|
        N, L = 3, math.pi
        c = NPieceString(N, 0.0, L)
        xi = 2 * math.pi * np.arange(1, 6) * 0.2
        want = 2 * np.log(np.abs(2**N * np.sinh(xi * L / (2 * N)) ** N / (2 * np.sinh(xi * L / 2))))
        np.testing.assert_allclose(integrand(c, xi * L / N), want, rtol=1e-12)

    def test_high_T_static(self):
        c = NPieceString(3, 0.4)
        T = 100.0
        assert energy_finite_T(c, T).value == pytest.approx(0.5 * T * 2 * math.log(c.d), rel=1e-10)

    def test_domain(self):
        with pytest.raises(DomainError):
            energy_finite_T(NPieceString(3, 0.4), -1.0)


class TestScaling:
    def test_limits(self):
        assert scaling_f(3, 1e-12) == pytest.approx(1.0, abs=1e-3)
        assert scaling_f(3, 1.0) == 0.0
        with pytest.raises(DomainError):
            scaling_f(1, 0.3)

    def test_range(self):
        for x in (0.01, 0.3, 0.9):
            assert 0 < scaling_f(2, x) < 1

    def test_quarter(self):
        assert scaling_f(2, 0.25) == pytest.approx(0.5**2.5, rel=0.1)

    @pytest.mark.slow
    def test_universality_and_fit(self):
        curves = np.array([[scaling_f(N, x) for x in X_GRID] for N in (2, 3, 4, 5)])
        assert np.max(curves.max(0) - curves.min(0)) < 0.01
        assert np.max(np.abs(curves - (1 - np.sqrt(X_GRID)) ** 2.5)) < 0.05

    def test_best_fit_exponent(self):
        fit = scaling_fit(3, X_GRID)
        assert 2.3 < fit["exponent"] < 2.8
        assert fit["max_residual"] <= fit["max_residual_5_2"] + 1e-12

    def test_monotone_in_x(self):
        xs = np.geomspace(1e-4, 0.99, 20)
        f = [scaling_f(2, x) for x in xs]
        assert all(b < a for a, b in zip(f, f[1:]))

    def test_record(self):
        c = NPieceString(2, 0.25)
        rec = npiece_record(c, energy_zero_T(c), scaling_f(2, 0.25))
        assert set(rec) == {"N", "x", "L", "T", "value", "f_N", "fit_residual"}


class TestMatrixOracle:
    @pytest.mark.parametrize("N", [2, 3])
    def test_det_equals_power_sum(self, N):
        c = NPieceString(N, 0.35)
        for p in (0.2, 0.9, 2.4, 3.0):
            sigma = 2 * (math.cos(p) - c.alpha**2)
            want = (2 * c.d**N - power_sum(sigma, c.d**2, N)) / c.d**N
            assert det_m_minus_one(c, p).real == pytest.approx(want, rel=1e-10, abs=1e-12)
            assert abs(det_m_minus_one(c, p).imag) < 1e-12

    def test_imaginary_phase_gives_integrand_numerator(self):
        c = NPieceString(3, 0.35)
        for q in (0.3, 1.5):
            want = numerator_direct(c.alpha, q, 3) / c.d**3
            assert det_m_minus_one(c, 1j * q).real == pytest.approx(float(want), rel=1e-10)

    def test_roots_match_band_structure(self):
        # N = 2: Det[M - 1] = 2 - 2 cos(2 phi), cos phi = (cos p - alpha^2)/d. Inside (0, 2 pi)
        # it has two simple zeros at cos p = 2 alpha^2 - 1, and a double zero at p = 2 pi:
        # 4 = 2N modes per period, the Weyl density of a closed string
        c = NPieceString(2, 0.35)
        f = lambda p: det_m_minus_one(c, p).real
        ps = np.linspace(1e-3, 2 * math.pi - 1e-3, 2001)
        vals = np.array([f(p) for p in ps])
        idx = np.nonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0]
        roots = [optimize.brentq(f, ps[i], ps[i + 1], xtol=1e-14) for i in idx]
        p0 = math.acos(2 * c.alpha**2 - 1)
        assert roots == pytest.approx([p0, 2 * math.pi - p0], abs=1e-9)
        assert f(2 * math.pi) == pytest.approx(0.0, abs=1e-12)
        assert f(2 * math.pi - 1e-3) > 0 and f(2 * math.pi + 1e-3) > 0

    def test_N1_matches_two_piece_s1(self):
        # N = 1 is the two-piece string with s = 1: roots at p = omega L = 2 pi n, all double
        from casimir.twopiece import TwoPieceString, find_spectrum

        c = NPieceString(1, 0.35)
        ps = np.linspace(0.1, 4 * math.pi - 0.1, 500)
        assert all(det_m_minus_one(c, p).real > 0 for p in ps)
        sp = find_spectrum(TwoPieceString(0.35, 1.0, c.L), 15.0)
        np.testing.assert_allclose(sp.frequencies[::2] * c.L, 2 * math.pi * np.arange(1, len(sp.frequencies) // 2 + 1))
        assert abs(det_m_minus_one(c, 2 * math.pi)) < 1e-12
