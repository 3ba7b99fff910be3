"""Special-function kernel: Hurwitz zeta at -1, Airy functions, Dedekind eta, Jacobi theta-3.

Everything here is a pure function of its arguments. The Airy pair is evaluated
on the real line by three regimes:

* Maclaurin series for ``-3 <= x <= 3``;
* Taylor stepping of the Airy ODE ``y'' = x y`` for ``3 < |x| < 8``. On the
  positive side only Ai and Ai' are stepped, backwards from an asymptotic anchor
  at ``x = 8`` (the direction in which Ai grows); Bi and Bi' keep using the
  Maclaurin series, which has no cancellation for ``x > 0``;
* Poincare asymptotic expansions (optimally truncated) for ``|x| >= 8``.

Measured against 40-digit references every regime stays below ~5e-13 (relative
for x > 0, relative to the envelope x**(-1/4) for x < 0). Far out on the
oscillatory side the phase 2/3 |x|**1.5 carries an extra rounding error of
order eps*|x|**1.5, about 3e-12 at x = -1e4.
"""
from __future__ import annotations

import cmath
import math
from typing import Callable, NamedTuple

import numpy as np

from .errors import ConvergenceError, DomainError, SaturationError
from .settings import PrecisionPolicy

__all__ = [
    "GAMMA_1_3",
    "GAMMA_2_3",
    "GAMMA_1_4",
    "AIRY_AI0",
    "AIRY_BI0",
    "AiryValues",
    "hurwitz_zeta_neg1",
    "airy",
    "airy_scaled",
    "airy_regime",
    "dedekind_eta",
    "log_eta_imag",
    "jacobi_theta3",
    "log_theta3_minus_one",
    "ode_residual_fd",
    "selftest",
]

_DEFAULT_POLICY = PrecisionPolicy()

# Gamma at the two rational points needed by the Airy constants and test oracles.
GAMMA_2_3 = 1.3541179394264004169
GAMMA_1_3 = 2.6789385347077476337
GAMMA_1_4 = 3.6256099082219083119

AIRY_AI0 = 1.0 / (3.0 ** (2.0 / 3.0) * GAMMA_2_3)
AIRY_BI0 = 1.0 / (3.0 ** (1.0 / 6.0) * GAMMA_2_3)
_AIRY_AIP0 = -1.0 / (3.0 ** (1.0 / 3.0) * GAMMA_1_3)
_AIRY_BIP0 = 3.0 ** (1.0 / 6.0) / GAMMA_1_3

_SQRT_PI = math.sqrt(math.pi)
_EPS = 2.0**-53

MACLAURIN_LIMIT = 3.0
ASYMPTOTIC_LIMIT = 8.0
_TAYLOR_STEP = 0.5
X_MAX = 1.0e4


def hurwitz_zeta_neg1(a: float) -> float:
    """Analytically continued Hurwitz zeta ``zeta_H(-1, a)`` for ``0 < a <= 1``.

    Closed form ``-(a**2 - a + 1/6) / 2``; no series is summed.
    """
    if not 0.0 < a <= 1.0:
        raise DomainError(f"hurwitz_zeta_neg1 needs 0 < a <= 1, got {a!r}")
    return -0.5 * (a * a - a + 1.0 / 6.0)


class AiryValues(NamedTuple):
    ai: float
    bi: float
    aip: float
    bip: float


# -- asymptotic coefficients u_k, v_k ------------------------------------------------

def _asymptotic_coefficients(n: int):
    u = [1.0]
    v = [1.0]
    for k in range(1, n):
        uk = u[-1] * (6 * k - 5) * (6 * k - 3) * (6 * k - 1) / ((2 * k - 1) * 216.0 * k)
        u.append(uk)
        v.append(-uk * (6 * k + 1) / (6 * k - 1))
    return u, v


_U, _V = _asymptotic_coefficients(80)


def _optimal_sum(coeffs, inv_zeta: float, sign: float, start: int = 0, stride: int = 1):
    """Sum ``sum_j sign**j * c[start + stride*j] * inv_zeta**(start + stride*j)``.

    Stops at machine precision or just before the terms start growing.
    """
    total = 0.0
    prev = math.inf
    s = 1.0
    for k in range(start, len(coeffs), stride):
        term = s * coeffs[k] * inv_zeta**k
        mag = abs(term)
        if mag > prev:
            break
        total += term
        if mag <= _EPS * abs(total):
            break
        prev = mag
        s *= sign
    return total


def _asymptotic_positive(x: float) -> AiryValues:
    # scaled values: Ai*e^zeta, Bi*e^-zeta (and derivatives)
    zeta = 2.0 / 3.0 * x**1.5
    iz = 1.0 / zeta
    x14 = x**0.25
    ai = _optimal_sum(_U, iz, -1.0) / (2.0 * _SQRT_PI * x14)
    aip = -x14 * _optimal_sum(_V, iz, -1.0) / (2.0 * _SQRT_PI)
    bi = _optimal_sum(_U, iz, 1.0) / (_SQRT_PI * x14)
    bip = x14 * _optimal_sum(_V, iz, 1.0) / _SQRT_PI
    return AiryValues(ai, bi, aip, bip)


def _asymptotic_negative(x: float) -> AiryValues:
    t = -x
    zeta = 2.0 / 3.0 * t**1.5
    iz = 1.0 / zeta
    t14 = t**0.25
    pu = _optimal_sum(_U, iz, -1.0, 0, 2)
    qu = _optimal_sum(_U, iz, -1.0, 1, 2)
    pv = _optimal_sum(_V, iz, -1.0, 0, 2)
    qv = _optimal_sum(_V, iz, -1.0, 1, 2)
    theta = zeta - math.pi / 4.0
    c, s = math.cos(theta), math.sin(theta)
    ai = (c * pu + s * qu) / (_SQRT_PI * t14)
    aip = t14 * (s * pv - c * qv) / _SQRT_PI
    bi = (-s * pu + c * qu) / (_SQRT_PI * t14)
    bip = t14 * (c * pv + s * qv) / _SQRT_PI
    return AiryValues(ai, bi, aip, bip)


# -- Maclaurin series ---------------------------------------------------------------

def _maclaurin(x: float):
    """Return (f, f', g, g') of the two standard power-series solutions."""
    x3 = x * x * x
    f, fp = 1.0, 0.0
    g, gp = x, 1.0
    a = 1.0  # coefficient of x**(3k) in f
    b = 1.0  # coefficient of x**(3k+1) in g
    xp = 1.0  # x**(3k)
    for k in range(1, 200):
        a /= (3 * k - 1) * (3 * k)
        b /= (3 * k) * (3 * k + 1)
        xp_prev = xp
        xp *= x3
        tf = a * xp
        tg = b * xp * x
        tfp = 3 * k * a * xp_prev * x * x
        tgp = (3 * k + 1) * b * xp
        f += tf
        fp += tfp
        g += tg
        gp += tgp
        scale = abs(f) + abs(g) + abs(fp) + abs(gp)
        if abs(tf) + abs(tg) + abs(tfp) + abs(tgp) <= _EPS * scale * 0.1:
            break
    return f, fp, g, gp


def _airy_maclaurin(x: float) -> AiryValues:
    f, fp, g, gp = _maclaurin(x)
    c1, c2 = AIRY_AI0, -_AIRY_AIP0
    ai = c1 * f - c2 * g
    aip = c1 * fp - c2 * gp
    r3 = math.sqrt(3.0)
    bi = r3 * (c1 * f + c2 * g)
    bip = r3 * (c1 * fp + c2 * gp)
    return AiryValues(ai, bi, aip, bip)


# -- Taylor stepping of y'' = x y ---------------------------------------------------

def _taylor_step(x0: float, y: float, yp: float, h: float):
    """Advance a solution of the Airy equation from ``x0`` to ``x0 + h``."""
    a_km1, a_k, a_kp1 = 0.0, y, yp  # a_{k-1}, a_k, a_{k+1} with k = 0
    val = y + yp * h
    der = yp
    hk = h  # h**(k+1)
    scale = abs(y) + abs(yp)
    small = 0
    for k in range(0, 120):
        a_next = (x0 * a_k + a_km1) / ((k + 2) * (k + 1))  # a_{k+2}
        term_v = a_next * hk * h
        term_d = (k + 2) * a_next * hk
        val += term_v
        der += term_d
        hk *= h
        a_km1, a_k, a_kp1 = a_k, a_kp1, a_next
        if abs(term_v) + abs(term_d) <= _EPS * 0.01 * (scale + abs(val) + abs(der)):
            small += 1
            if small >= 3:
                break
        else:
            small = 0
    return val, der


def _step_to(x0: float, y: float, yp: float, x1: float):
    n = max(1, math.ceil(abs(x1 - x0) / _TAYLOR_STEP))
    h = (x1 - x0) / n
    x = x0
    for _ in range(n):
        y, yp = _taylor_step(x, y, yp, h)
        x += h
    return y, yp


_ANCHOR_POS = _asymptotic_positive(ASYMPTOTIC_LIMIT)
_ANCHOR_ZETA = 2.0 / 3.0 * ASYMPTOTIC_LIMIT**1.5
_ANCHOR_NEG = _airy_maclaurin(-MACLAURIN_LIMIT)


def airy_regime(x: float) -> str:
    """Name of the evaluation regime used at ``x`` (diagnostic)."""
    if -MACLAURIN_LIMIT <= x <= MACLAURIN_LIMIT:
        return "maclaurin"
    if abs(x) < ASYMPTOTIC_LIMIT:
        return "taylor"
    return "asymptotic"


def _scale_exponent(x: float) -> float:
    return 2.0 / 3.0 * x**1.5 if x > 0 else 0.0


def airy_scaled(x: float) -> AiryValues:
    """Exponentially scaled Airy values.

    Returns ``(Ai e^z, Bi e^-z, Ai' e^z, Bi' e^-z)`` with ``z = 2/3 x**1.5`` for
    ``x > 0`` and ``z = 0`` otherwise. Never overflows inside the working range.
    """
    x = float(x)
    if not math.isfinite(x) or abs(x) > X_MAX:
        raise DomainError(f"airy argument {x!r} outside |x| <= {X_MAX:g}")
    if x >= ASYMPTOTIC_LIMIT:
        return _asymptotic_positive(x)
    if x <= -ASYMPTOTIC_LIMIT:
        return _asymptotic_negative(x)
    if x < -MACLAURIN_LIMIT:
        a = _ANCHOR_NEG
        ai, aip = _step_to(-MACLAURIN_LIMIT, a.ai, a.aip, x)
        bi, bip = _step_to(-MACLAURIN_LIMIT, a.bi, a.bip, x)
        return AiryValues(ai, bi, aip, bip)
    m = _airy_maclaurin(x)
    zeta = _scale_exponent(x)
    if x <= MACLAURIN_LIMIT:
        ai, aip = m.ai, m.aip
    else:
        # unscaled Ai at the anchor is e^-15.08 * O(0.1): well inside range
        w = math.exp(-_ANCHOR_ZETA)
        ai, aip = _step_to(ASYMPTOTIC_LIMIT, _ANCHOR_POS.ai * w, _ANCHOR_POS.aip * w, x)
    up, down = math.exp(zeta), math.exp(-zeta)
    return AiryValues(ai * up, m.bi * down, aip * up, m.bip * down)


def airy(x: float) -> AiryValues:
    """Ai, Bi, Ai', Bi' at real ``x`` with ``|x| <= 1e4``.

    Raises :class:`SaturationError` when Bi(x) would overflow a double
    (``x`` above roughly 104.8); Ai underflows quietly to zero there.
    """
    s = airy_scaled(x)
    zeta = _scale_exponent(float(x))
    if zeta == 0.0:
        return s
    if zeta > 709.0:
        raise SaturationError(f"Bi({x}) exceeds double range (exponent {zeta:.1f})")
    up, down = math.exp(zeta), math.exp(-zeta)
    return AiryValues(s.ai * down, s.bi * up, s.aip * down, s.bip * up)


# -- Dedekind eta -------------------------------------------------------------------

def _eta_terms(imag: float, policy: PrecisionPolicy) -> int:
    log_q = -2.0 * math.pi * imag
    m = max(0, math.ceil(math.log(policy.target_rel_error) / log_q) - 1)
    if m > policy.max_terms:
        raise ConvergenceError(
            f"eta product needs {m} factors at Im(tau)={imag:g}, above max_terms={policy.max_terms}"
        )
    return m


def dedekind_eta(tau: complex, policy: PrecisionPolicy | None = None, return_terms: bool = False):
    """Dedekind eta ``e^{i pi tau/12} prod_{n>=1} (1 - e^{2 pi i n tau})``.

    The product is truncated once the first omitted factor differs from one
    by less than ``policy.target_rel_error``. With ``return_terms=True`` the
    pair ``(value, M)`` is returned, ``M`` being the number of factors used.
    """
    policy = policy or _DEFAULT_POLICY
    tau = complex(tau)
    if not tau.imag > 0:
        raise DomainError(f"dedekind_eta needs Im(tau) > 0, got {tau!r}")
    m = _eta_terms(tau.imag, policy)
    n = np.arange(1, m + 1)
    prod = np.prod(1.0 - np.exp(2j * np.pi * n * tau)) if m else 1.0
    value = cmath.exp(1j * math.pi * tau / 12.0) * complex(prod)
    return (value, m) if return_terms else value


def log_eta_imag(y, policy: PrecisionPolicy | None = None):
    """``log eta(i y)`` for real ``y > 0`` (eta is real and positive there).

    Accepts scalars or arrays; the real-argument path avoids complex arithmetic.
    """
    policy = policy or _DEFAULT_POLICY
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise DomainError("log_eta_imag needs y > 0")
    m = _eta_terms(float(y.min()), policy)
    n = np.arange(1, m + 1)
    out = -np.pi * y / 12.0
    if m:
        out = out + np.log1p(-np.exp(-2.0 * np.pi * np.multiply.outer(y, n))).sum(axis=-1)
    return out if out.ndim else float(out)


# -- Jacobi theta-3 -----------------------------------------------------------------

def jacobi_theta3(v: float, x: complex, policy: PrecisionPolicy | None = None) -> complex:
    """``sum_n exp(i x n**2 + 2 pi i v n)`` summed symmetrically over ``|n| <= M``.

    Note the convention: the quadratic phase is ``i x n**2`` (no factor pi).
    ``M`` is the smallest cut for which the omitted tail is below
    ``policy.target_rel_error`` in absolute value (the ``n = 0`` term is 1).
    """
    policy = policy or _DEFAULT_POLICY
    x = complex(x)
    y = x.imag
    if not y > 0:
        raise DomainError(f"jacobi_theta3 needs Im(x) > 0, got {x!r}")
    tol = policy.target_rel_error
    m = 0
    while True:
        r = math.exp(-y * (2 * m + 3))
        tail = 2.0 * math.exp(-y * (m + 1) ** 2) / (1.0 - r) if r < 1 else math.inf
        if tail < tol:
            break
        m += 1
        if m > policy.max_terms:
            raise ConvergenceError(f"theta3 needs more than {policy.max_terms} terms at Im(x)={y:g}")
    n = np.arange(1, m + 1)
    terms = np.exp(1j * x * n * n) * 2.0 * np.cos(2.0 * np.pi * v * n)
    return complex(1.0 + terms.sum())


def log_theta3_minus_one(y):
    """``log(theta3(0 | i y) - 1)`` for real ``y > 0``, in the ``i x n**2`` convention.

    Direct sum for ``y >= 0.5``; Poisson-resummed series below, where
    ``theta3 = sqrt(pi/y) (1 + 2 sum_k exp(-pi**2 k**2 / y))``. Both forms keep
    full relative accuracy, including the far tails (``y`` huge or tiny).
    """
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise DomainError("log_theta3_minus_one needs y > 0")
    out = np.empty_like(y)
    big = y >= 0.5
    if np.any(big):
        yb = y[big]
        n = np.arange(2, 12)
        rest = np.exp(-np.multiply.outer(yb, n * n - 1.0)).sum(axis=-1)
        out[big] = math.log(2.0) - yb + np.log1p(rest)
    if np.any(~big):
        ys = y[~big]
        k = np.arange(1, 8)
        s = 1.0 + 2.0 * np.exp(-np.multiply.outer(1.0 / ys, math.pi**2 * k * k)).sum(axis=-1)
        out[~big] = np.log(np.sqrt(math.pi / ys) * s - 1.0)
    return out if out.ndim else float(out)


def ode_residual_fd(x: float, which: str = "ai", h: float = 1e-3) -> float:
    """``|y''(x) - x y(x)|`` with ``y''`` from a fourth-order central difference of ``y'``."""
    d = "aip" if which == "ai" else "bip"
    f = [getattr(airy(x + k * h), d) for k in (-2, -1, 1, 2)]
    second = (f[0] - 8.0 * f[1] + 8.0 * f[2] - f[3]) / (12.0 * h)
    return abs(second - x * getattr(airy(x), which))


# -- self test ----------------------------------------------------------------------

def _check(name: str, fn: Callable[[], tuple[bool, str]]):
    try:
        ok, detail = fn()
    except Exception as exc:  # report, never raise, from the self test
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    return name, bool(ok), detail


def selftest() -> list[tuple[str, bool, str]]:
    """Run the kernel's accuracy invariants; returns ``(name, passed, detail)`` rows."""

    def wronskian():
        xs = np.linspace(-10.0, 30.0, 401)
        err = max(abs(a.ai * a.bip - a.aip * a.bi - 1.0 / math.pi) for a in map(airy, xs))
        return err < 1e-9, f"max |W - 1/pi| = {err:.2e}"

    def ode_residual():
        worst = 0.0
        for x in np.linspace(-10.0, 10.0, 81):
            for name in ("ai", "bi"):
                r = ode_residual_fd(x, name)
                worst = max(worst, r / max(1.0, abs(getattr(airy(x), name))))
        return worst < 1e-7, f"max |y'' - x y| / max(1,|y|) = {worst:.2e}"

    def airy_zero():
        a = airy(0.0)
        err = max(abs(a.ai - 0.3550280538878172), abs(a.bi - 0.6149266274460007))
        return err < 1e-15, f"|Ai(0), Bi(0) error| = {err:.1e}"

    def crossover():
        worst = 0.0
        for x in (ASYMPTOTIC_LIMIT - 1e-9, -ASYMPTOTIC_LIMIT + 1e-9):
            inner, outer = airy_scaled(x), (
                _asymptotic_positive(x) if x > 0 else _asymptotic_negative(x)
            )
            worst = max(worst, max(abs(p - q) / max(abs(q), 1e-300) for p, q in zip(inner, outer)))
        return worst < 1e-10, f"regime mismatch at |x|=8: {worst:.1e}"

    def zeta_symmetry():
        rng = np.random.default_rng(0)
        a = rng.uniform(1e-6, 1.0 - 1e-6, 100)
        err = max(abs(hurwitz_zeta_neg1(t) - hurwitz_zeta_neg1(1.0 - t)) for t in a)
        return err < 1e-15 and hurwitz_zeta_neg1(1.0) == -1.0 / 12.0, f"max asym {err:.1e}"

    def eta_i():
        v = dedekind_eta(1j)
        ref = GAMMA_1_4 / (2.0 * math.pi**0.75)
        return abs(v - ref) < 1e-10 * ref, f"eta(i) = {v.real:.12f}"

    def theta_i():
        v = jacobi_theta3(0.0, 1j)
        return abs(v - 1.7726372048266521) < 1e-10, f"theta3(0|i) = {v.real:.12f}"

    return [
        _check("airy_wronskian", wronskian),
        _check("airy_ode_residual", ode_residual),
        _check("airy_at_zero", airy_zero),
        _check("airy_crossover", crossover),
        _check("hurwitz_symmetry", zeta_symmetry),
        _check("eta_at_i", eta_i),
        _check("theta3_at_i", theta_i),
    ]
