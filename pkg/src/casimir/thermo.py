"""Thermodynamics of the quantized two-piece string at vanishing tension ratio.

Only the first branch (frequencies ``(1+s) n``) enters the free energy. The
one-loop free energy in ``D = 26`` is

    F = -(s + 1/s - 2)/24 - 2^-40 pi^-26 t^-13 int dtau2 tau2^-14 int dtau1
        [theta3(0 | i beta^2 t / (8 pi^2 tau2)) - 1] |eta((1+s) tau)|^-48 eta(2 i s(1+s) tau2)^-24

with ``t = pi s T_II / (1+s)`` and ``theta3`` in the ``exp(i x n^2)`` convention,
so the bracket is ``sum_{n != 0} exp(-c n^2 / tau2)``, ``c = beta^2 t / (8 pi^2)``.

Evaluation scheme
-----------------
* For integer ``s`` the ``tau1`` integral is done exactly: expanding
  ``eta^-24 = sum_n p24(n) q^(n-1)`` the cross terms integrate to zero and
  ``int |eta((1+s)tau)|^-48 dtau1 = sum_n p24(n)^2 exp(-4 pi (1+s) tau2 (n-1))``.
* Terms whose exponent grows with ``tau2`` (tachyonic levels) make the
  literal integral diverge at large ``tau2`` for every ``beta``. By default
  they are dropped (``drop_tachyons=True``); the remaining massless and
  massive levels give a power-law ``tau2^-13.5`` tail.
* At small ``tau2`` the level sums grow like ``exp(pi (4s+1) / (s (1+s) tau2))``
  while the theta bracket decays like ``exp(-c / tau2)``. The integral therefore
  converges only for ``beta > divergence_beta(s, T_II)``, which lies above
  ``hagedorn_beta``. This is detected from the integrand itself and
  reported as a :class:`ConvergenceError`.
* The ``tau2`` integral runs in ``log tau2`` over a window cut where the
  integrand falls ``tail_cut`` below its peak; everything is done in log space.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Literal

import numpy as np
from scipy import integrate
from scipy.special import logsumexp

from .errors import ConvergenceError, DomainError, HagedornViolation
from .settings import QuadratureSettings
from .specfun import log_theta3_minus_one

__all__ = [
    "QuantizedStringParams",
    "BranchSpectrum",
    "FreeEnergyResult",
    "mean_tension",
    "hagedorn_beta",
    "divergence_beta",
    "casimir_term",
    "p24_coefficients",
    "log_integrand",
    "free_energy",
    "free_energy_pointmass",
    "thermodynamics",
]

P24_TERMS = 3000
_LOG_WINDOW = 40.0  # e-folds below the peak at which the tau2 window is cut


def _integer_s(s) -> int:
    si = int(round(s))
    if si != s or si < 1:
        raise DomainError(f"s must be an integer >= 1, got {s!r}")
    return si


@dataclass(frozen=True)
class QuantizedStringParams:
    """Integer length ratio ``s``, tension ``T_II``, inverse temperature ``beta``; ``D`` must be 26."""

    s: int
    tension_II: float
    beta: float
    D: int = 26

    def __post_init__(self):
        _integer_s(self.s)
        if not self.tension_II > 0:
            raise DomainError("tension_II must be positive")
        if not self.beta > 0:
            raise DomainError("beta must be positive")
        if self.D != 26:
            raise DomainError(f"the free-energy exponents are specific to D = 26, got D = {self.D}")

    @property
    def t(self) -> float:
        return mean_tension(self.s, self.tension_II)


@dataclass(frozen=True)
class BranchSpectrum:
    """Oscillator frequencies of one branch: ``(1+s) n`` (first) or ``(1+1/s) n`` (second)."""

    s: int
    branch: Literal["first", "second"] = "first"

    def __post_init__(self):
        _integer_s(self.s)
        if self.branch not in ("first", "second"):
            raise DomainError("branch must be 'first' or 'second'")

    @property
    def spacing(self) -> float:
        return 1.0 + self.s if self.branch == "first" else 1.0 + 1.0 / self.s

    def frequencies(self, n_max: int) -> np.ndarray:
        return self.spacing * np.arange(1, n_max + 1)


@dataclass(frozen=True)
class FreeEnergyResult:
    value: float
    casimir_term: float
    integral_term: float
    quad_diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.value != self.casimir_term + self.integral_term:
            raise ValueError("value must equal casimir_term + integral_term")


def mean_tension(s: int, tension_II: float) -> float:
    """``t(s) = pi s T_II / (1 + s)``."""
    _integer_s(s)
    if not tension_II > 0:
        raise DomainError("tension_II must be positive")
    return math.pi * s / (1.0 + s) * tension_II


def hagedorn_beta(s: int, tension_II: float) -> float:
    """Critical inverse temperature ``4 pi / sqrt(2 (1+s) t(s)) = 4 sqrt(pi / (2 s T_II))``.

    Both expressions are evaluated and required to agree to 1e-12.
    """
    t = mean_tension(s, tension_II)
    a = 4.0 * math.pi / math.sqrt(2.0 * (1.0 + s) * t)
    b = 4.0 * math.sqrt(math.pi / (2.0 * s * tension_II))
    if not math.isclose(a, b, rel_tol=1e-12):
        raise ArithmeticError(f"closed forms of the critical beta disagree: {a!r} vs {b!r}")
    return b


def divergence_beta(s: int, tension_II: float) -> float:
    """``beta`` below which the small-``tau2`` end of the integral diverges.

    ``sqrt(8 pi^2 (4s + 1) / (s^2 T_II))``, from balancing ``c / tau2`` against
    the growth ``pi (4s+1) / (s (1+s) tau2)`` of the level sums.
    """
    _integer_s(s)
    return math.sqrt(8.0 * math.pi**2 * (4 * s + 1) / (s * s * tension_II))


def casimir_term(s: int) -> float:
    """``-(s + 1/s - 2) / 24``."""
    return -(1.0 / 24.0) * (s + 1.0 / s - 2.0)


@lru_cache(maxsize=1)
def p24_coefficients(n_terms: int = P24_TERMS) -> np.ndarray:
    """Coefficients of ``prod_n (1 - q^n)^-24``: 1, 24, 324, 3200, ...

    From ``n a_n = 24 sum_j sigma(j) a_{n-j}``; all terms are positive so the
    recurrence is stable. Values stay below 1e300 up to ``n = 3000``.
    """
    n = np.arange(n_terms + 1)
    sigma = np.zeros(n_terms + 1)
    for j in range(1, n_terms + 1):
        sigma[j::j] += j
    a = np.zeros(n_terms + 1)
    a[0] = 1.0
    for k in range(1, n_terms + 1):
        a[k] = 24.0 * np.dot(sigma[1 : k + 1], a[k - 1 :: -1][:k]) / k
    if not np.all(np.isfinite(a)):
        raise ArithmeticError("p24 coefficients overflowed")
    return a


@lru_cache(maxsize=1)
def _log_p24() -> np.ndarray:
    return np.log(p24_coefficients())


def _log_levels(s: int, tau2: np.ndarray, drop_tachyons: bool):
    """Log of the tau1-integrated level sum, and a flag for series truncation.

    Level ``(n, m)`` carries ``exp(-4 pi y [(n - 1) + s (m - 1)])`` with
    ``y = (1+s) tau2``; integer exponents are combined before scaling by ``y``
    so no large opposite exponents cancel in floating point.
    """
    lp = _log_p24()
    n = np.arange(lp.size)
    y = (1.0 + s) * tau2[:, None]
    k = 4.0 * math.pi * y
    a_n = 2.0 * lp[None, :] - k * n[None, :]  # A level n without its e^{+k}
    b_m = lp[None, :] - s * k * n[None, :]  # B level m without its e^{+s k}
    truncated = np.maximum(a_n[:, -1] - a_n.max(axis=1), b_m[:, -1] - b_m.max(axis=1)) > -_LOG_WINDOW
    if not drop_tachyons:
        return logsumexp(a_n, axis=1) + logsumexp(b_m, axis=1) + k[:, 0] * (1.0 + s), truncated
    kk = k[:, 0]
    parts = [
        # no c-quanta (m = 0), level n > s: exponent -(n - 1 - s)
        logsumexp(2.0 * lp[None, s + 1 :] - k * (n[None, s + 1 :] - 1.0 - s), axis=1),
        # one c-quantum (m = 1, p24(1) = 24), level n >= 1
        math.log(24.0) + logsumexp(2.0 * lp[None, 1:] - k * (n[None, 1:] - 1.0), axis=1),
        # m >= 2, any n: e^{k} e^{-s k (m - 1)} = e^{-k (s - 1)} e^{-s k (m - 2)}
        logsumexp(a_n, axis=1) + logsumexp(lp[None, 2:] - s * k * (n[None, 2:] - 2.0), axis=1) - kk * (s - 1.0),
    ]
    return logsumexp(np.stack(parts), axis=0), truncated


def log_integrand(s: int, c: float, u, drop_tachyons: bool = True, pointmass: bool = False):
    """Log of the ``tau1``-integrated integrand in ``u = log tau2`` (including the Jacobian).

    ``c`` multiplies ``n^2 / tau2`` in the theta bracket. With
    ``pointmass=True`` the bracket is the single exponential ``exp(-c / tau2)``.
    Returns ``(values, truncated)``.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    tau2 = np.exp(u)
    theta = -c / tau2 if pointmass else log_theta3_minus_one(c / tau2)
    levels, truncated = _log_levels(s, tau2, drop_tachyons)
    return -13.0 * u + theta + levels, truncated


def _tau2_integral(
    s: int, c: float, quad: QuadratureSettings, drop_tachyons: bool, pointmass: bool, threshold: float
) -> tuple[float, dict]:
    """``log`` of the tau2 integral plus diagnostics; raises on non-decaying tails."""
    u_top = math.log(max(1e4, 1e3 * c))
    u = np.linspace(math.log(1e-4), u_top, int(200 * (u_top - math.log(1e-4))) + 1)
    vals, trunc = log_integrand(s, c, u, drop_tachyons, pointmass)
    ok = ~trunc
    if not np.any(ok):
        raise ConvergenceError("level sums cannot be evaluated on the tau2 grid")
    i0 = int(np.argmax(ok))
    peak_idx = i0 + int(np.argmax(vals[i0:]))
    peak = float(vals[peak_idx])
    diag = {"tau2_peak": float(math.exp(u[peak_idx])), "log_peak": peak}
    if vals[i0] > peak - _LOG_WINDOW:
        raise ConvergenceError(
            f"small-tau2 tail does not decay (beta below the convergence region, "
            f"estimated threshold beta = {threshold:.6g})",
        )
    if vals[-1] > peak - _LOG_WINDOW or peak_idx == len(u) - 1:
        raise ConvergenceError("large-tau2 tail does not decay (tachyonic levels kept?)")
    below = np.nonzero(vals[: peak_idx + 1] < peak - _LOG_WINDOW)[0]
    above = np.nonzero(vals[peak_idx:] < peak - _LOG_WINDOW)[0]
    u_lo = float(u[below[-1]])
    u_hi = float(u[peak_idx + above[0]])
    f = lambda x: math.exp(float(log_integrand(s, c, x, drop_tachyons, pointmass)[0][0]) - peak)
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(
                f, u_lo, u_hi, points=[float(u[peak_idx])], epsabs=0.0,
                epsrel=quad.rel_tol, limit=quad.max_subdivisions,
            )
        except integrate.IntegrationWarning as exc:
            raise ConvergenceError(f"tau2 quadrature failed: {exc}") from exc
    nodes = np.linspace(u_lo, u_hi, 64)
    node_vals = np.exp(log_integrand(s, c, nodes, drop_tachyons, pointmass)[0] - peak)
    diag.update(
        tau2_window=(math.exp(u_lo), math.exp(u_hi)),
        rel_error=err / val if val else math.inf,
        min_integrand=float(node_vals.min()),
    )
    if np.any(node_vals < 0):
        raise ArithmeticError("negative integrand encountered")
    return peak + math.log(val), diag


def free_energy(
    p: QuantizedStringParams,
    quad: QuadratureSettings | None = None,
    margin: float = 0.05,
    drop_tachyons: bool = True,
) -> FreeEnergyResult:
    """Free energy of the first branch at inverse temperature ``p.beta``.

    Raises :class:`HagedornViolation` when ``beta <= beta_c (1 + margin)`` and
    :class:`ConvergenceError` when the ``tau2`` integrand fails to decay.
    """
    quad = quad or QuadratureSettings()
    s = _integer_s(p.s)
    beta_c = hagedorn_beta(s, p.tension_II)
    if p.beta <= beta_c * (1.0 + margin):
        raise HagedornViolation(f"beta = {p.beta:g} is not above beta_c (1 + {margin}) = {beta_c * (1 + margin):g}")
    t = p.t
    c = p.beta**2 * t / (8.0 * math.pi**2)
    log_i, diag = _tau2_integral(s, c, quad, drop_tachyons, False, divergence_beta(s, p.tension_II))
    log_pref = -40.0 * math.log(2.0) - 26.0 * math.log(math.pi) - 13.0 * math.log(t)
    integral = -math.exp(log_pref + log_i)
    cas = casimir_term(s)
    diag["beta_c"] = beta_c
    return FreeEnergyResult(cas + integral, cas, integral, diag)


def free_energy_pointmass(
    s: int,
    tension_II: float,
    beta: float,
    quad: QuadratureSettings | None = None,
    drop_tachyons: bool = True,
) -> float:
    """Large-``s`` form: ``-s/24 - (8 pi^3 T_II)^-13 int ... exp(-beta^2 T_II / (8 pi tau2)) ...``."""
    quad = quad or QuadratureSettings()
    s = _integer_s(s)
    if not tension_II > 0 or not beta > 0:
        raise DomainError("tension_II and beta must be positive")
    c = beta**2 * tension_II / (8.0 * math.pi)
    # the single exponential has twice the theta bracket's coefficient of 1/tau2 at large s
    log_i, _ = _tau2_integral(s, c, quad, drop_tachyons, True, divergence_beta(s, tension_II))
    return -s / 24.0 - math.exp(-13.0 * math.log(8.0 * math.pi**3 * tension_II) + log_i)


def thermodynamics(
    p: QuantizedStringParams,
    dbeta: float | None = None,
    quad: QuadratureSettings | None = None,
) -> tuple[float, float]:
    """Internal energy ``U = d(beta F)/d beta`` and entropy ``S = beta^2 dF/d beta``.

    ``dF/d beta`` is a central difference of the integral term with step
    ``dbeta`` (default ``1e-4 beta``) refined by one Richardson step.
    """
    quad = quad or QuadratureSettings(rel_tol=1e-12)
    h = dbeta if dbeta is not None else 1e-4 * p.beta
    if not h > 0:
        raise DomainError("dbeta must be positive")

    def integral(b: float) -> float:
        q = QuantizedStringParams(p.s, p.tension_II, b, p.D)
        return free_energy(q, quad).integral_term

    f0 = free_energy(p, quad)
    fp, fm = integral(p.beta + h), integral(p.beta - h)
    fp2, fm2 = integral(p.beta + h / 2), integral(p.beta - h / 2)
    d1 = (fp - fm) / (2 * h)
    d2 = (fp2 - fm2) / h
    deriv = (4.0 * d2 - d1) / 3.0
    scale = max(abs(fp), abs(fm))
    if scale and abs(fp - fm) < 1e-8 * scale:
        warnings.warn("finite-difference step loses more than half the significant digits", RuntimeWarning, stacklevel=2)
    S = p.beta**2 * deriv
    U = f0.value + p.beta * deriv
    return U, S
