"""Massless scalar field over a linear ramp that flattens into a plateau.

The potential is ``V(z) = z - 1`` on ``[0, 1)`` and zero beyond, with a
Dirichlet wall at ``z = 0``. After Wick rotation the reduced Green function at
fixed ``kappa**2 = k**2 + zeta**2`` is built from Airy functions on the ramp
and exponentials on the plateau; its matching yields the denominator ``Q``.

All Airy products are formed from exponentially scaled values, so nothing
overflows for ``kappa`` up to 100, and ``Q - 2 kappa`` comes from the
asymptotic expansion of ``Bi'/Bi`` once ``kappa >= KAPPA_ASYMPTOTIC``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import ConvergenceError, DomainError, SaturationError
from .settings import EnergyEstimate, QuadratureSettings
from .specfun import _U, _V, airy_scaled

__all__ = [
    "KAPPA_ASYMPTOTIC",
    "GreenCoefficients",
    "potential",
    "q_factor",
    "q_minus_two_kappa",
    "green_coefficients",
    "green_function",
    "green_function_plateau",
    "energy_integrand",
    "energy_density",
    "energy_density_estimate",
    "energy_density_mc",
    "large_kappa_exponent",
    "q_sign_changes",
]

KAPPA_ASYMPTOTIC = 20.0
_ASYMPTOTIC_TERMS = 10
_POLE_FLOOR = 1e-300


def potential(z: float) -> float:
    """Ramp ``z - 1`` below the knee at ``z = 1``, zero on the plateau."""
    if not z >= 0:
        raise DomainError(f"potential needs z >= 0, got {z!r}")
    return z - 1.0 if z < 1.0 else 0.0


def _xi(x: float) -> float:
    return 2.0 / 3.0 * x**1.5 if x > 0 else 0.0


def _check_kappa(kappa: float) -> float:
    kappa = float(kappa)
    if not (kappa > 0 and math.isfinite(kappa)):
        raise DomainError(f"kappa must be positive and finite, got {kappa!r}")
    return kappa


def _scaled_pair(kappa: float):
    """Scaled Airy data at ``X = kappa**2`` and ``Y = X - 1`` plus ``exp(-2 delta)``.

    ``delta = xi(X) - xi(Y)``; Ai is scaled by ``e^xi`` and Bi by ``e^-xi``.
    """
    X = kappa * kappa
    Y = X - 1.0
    ax, ay = airy_scaled(X), airy_scaled(Y)
    delta = _xi(X) - _xi(Y)
    return ax, ay, delta, math.exp(-2.0 * delta)


def _matching_ratio(kappa: float) -> tuple[float, float]:
    """``h'(1)/h(1)`` for the ramp solution vanishing at the wall, and ``h(1)`` scaled."""
    ax, ay, _, w = _scaled_pair(kappa)
    num = ax.aip * ay.bi * w - ay.ai * ax.bip
    den = ax.ai * ay.bi * w - ay.ai * ax.bi
    if abs(den) < _POLE_FLOOR:
        raise ConvergenceError(f"matching denominator vanishes at kappa = {kappa!r}")
    return num / den, den


def _bi_log_derivative_excess(kappa: float) -> float:
    """``Bi'(k^2)/Bi(k^2) - k`` from the large-argument expansion."""
    zeta = 2.0 / 3.0 * kappa**3
    su = sd = 0.0
    p = 1.0
    for k in range(_ASYMPTOTIC_TERMS):
        su += _U[k] * p
        sd += (_V[k] - _U[k]) * p
        p /= zeta
    return kappa * sd / su


def q_minus_two_kappa(kappa: float) -> float:
    """``Q(kappa) - 2 kappa`` without the cancellation of forming ``Q`` first.

    Behaves as ``-1/(4 kappa**2)`` for large ``kappa``.
    """
    kappa = _check_kappa(kappa)
    if kappa >= KAPPA_ASYMPTOTIC:
        # the discarded Ai/Bi cross terms are of relative size e^(-2 kappa)
        return _bi_log_derivative_excess(kappa)
    ratio, _ = _matching_ratio(kappa)
    return ratio - kappa


def q_factor(kappa: float) -> float:
    """Matching denominator ``Q = kappa + h'(1)/h(1)``; tends to ``2 kappa``."""
    kappa = _check_kappa(kappa)
    return 2.0 * kappa + q_minus_two_kappa(kappa)


@dataclass(frozen=True)
class GreenCoefficients:
    """Ramp coefficients ``A, B``, plateau reflection ``C`` and ``Q``.

    ``A`` and ``B`` can overflow a double long before the products ``A Ai``
    and ``B Bi`` do, so the scaled pair ``a_scaled = A e^-xi(k^2)`` and
    ``b_scaled = B e^xi(k^2)`` is what the field evaluation uses. ``A`` is
    ``nan`` when it would overflow.
    """

    A: float
    B: float
    C: float
    Q: float
    kappa: float
    z_source: float
    a_scaled: float
    b_scaled: float

    def residuals(self) -> tuple[float, float, float]:
        """Relative residuals of the wall condition, value match and slope match."""
        ax, ay, _, w = _scaled_pair(self.kappa)
        E = math.exp(-self.kappa * (self.z_source - 1.0))
        a, b, c, k = self.a_scaled, self.b_scaled, self.C, self.kappa
        # wall row divided by exp(delta): Ai(Y) A + Bi(Y) B
        t = (a * ay.ai, b * ay.bi * w)
        r0 = abs(t[0] + t[1]) / max(abs(t[0]), abs(t[1]), 1e-300)
        t = (a * ax.ai, b * ax.bi, -c, -E / (2 * k))
        r1 = abs(sum(t)) / max(map(abs, t))
        t = (a * ax.aip, b * ax.bip, k * c, -E / 2)
        r2 = abs(sum(t)) / max(map(abs, t))
        return r0, r1, r2


def _closed_coefficients(kappa: float, z_source: float):
    ax, ay, _, w = _scaled_pair(kappa)
    Q = q_factor(kappa)
    E = math.exp(-kappa * (z_source - 1.0))
    den = ax.ai * ay.bi * w - ay.ai * ax.bi
    lam = E / (den * Q)
    return lam * ay.bi * w, -lam * ay.ai, -(0.5 / kappa - 1.0 / Q) * E, Q


def green_coefficients(kappa: float, z_source: float) -> GreenCoefficients:
    """Solve the wall/continuity/slope system for a source on the plateau.

    The 3x3 system is solved numerically in scaled unknowns; the closed form
    ``C = -(1/(2 kappa) - 1/Q) exp(-kappa (z' - 1))`` is then an independent
    check available through :func:`_closed_coefficients`.
    """
    kappa = _check_kappa(kappa)
    if not z_source > 1.0:
        raise DomainError(f"source must sit on the plateau z' > 1, got {z_source!r}")
    ax, ay, _, w = _scaled_pair(kappa)
    E = math.exp(-kappa * (z_source - 1.0))
    # unknowns (a / w, b, C): the ramp pieces are then of comparable size
    M = np.array([
        [ay.ai, ay.bi, 0.0],
        [ax.ai * w, ax.bi, -1.0],
        [ax.aip * w, ax.bip, kappa],
    ])
    rhs = np.array([0.0, 0.5 / kappa, 0.5])
    a, b, c = np.linalg.solve(M, rhs) * E
    a *= w
    Q = q_factor(kappa)
    xi = _xi(kappa * kappa)
    with np.errstate(over="ignore"):
        A = float(a * math.exp(xi)) if xi < 700 else math.nan
        B = float(b * math.exp(-xi))
    return GreenCoefficients(A, B, float(c), Q, kappa, float(z_source), float(a), float(b))


def green_function(kappa: float, z: float, z_source: float) -> float:
    """Reduced Green function ``g(z, z')`` for ``z >= 0`` and ``z' > 1``."""
    if not z >= 0:
        raise DomainError(f"green_function needs z >= 0, got {z!r}")
    co = green_coefficients(kappa, z_source)
    k = co.kappa
    if z < 1.0:
        x = k * k - 1.0 + z
        s = airy_scaled(x)
        d = _xi(k * k) - _xi(x)
        if d > 700:
            raise SaturationError(f"ramp solution out of range at kappa={k}, z={z}")
        return co.a_scaled * s.ai * math.exp(d) + co.b_scaled * s.bi * math.exp(-d)
    return math.exp(-k * abs(z - z_source)) / (2 * k) + co.C * math.exp(-k * (z - 1.0))


def green_function_plateau(kappa: float, z: float, z_source: float) -> float:
    """Closed plateau form with the reflection written through ``Q``."""
    kappa = _check_kappa(kappa)
    if not (z >= 1.0 and z_source >= 1.0):
        raise DomainError("plateau form needs z, z' >= 1")
    Q = q_factor(kappa)
    return (math.exp(-kappa * abs(z - z_source)) / (2 * kappa)
            - (0.5 / kappa - 1.0 / Q) * math.exp(-kappa * (z + z_source - 2.0)))


def _shape(kappa: float) -> float:
    """``kappa**4 (1/kappa - 2/Q)`` computed as ``kappa**3 (Q - 2 kappa)/Q``."""
    if kappa == 0.0:
        return 0.0
    d = q_minus_two_kappa(kappa)
    return kappa**3 * d / (2.0 * kappa + d)


def energy_integrand(kappa: float, z: float) -> float:
    return _shape(kappa) * math.exp(-2.0 * kappa * (z - 1.0))


_PREFACTOR = -2.0 / 3.0 / (4.0 * math.pi**2)


def energy_density_estimate(z: float, quad: QuadratureSettings | None = None) -> EnergyEstimate:
    """Renormalized energy density on the plateau with a truncation bound."""
    quad = quad or QuadratureSettings()
    z = float(z)
    if not z > 1.0:
        raise DomainError(f"energy density is evaluated on the open plateau z > 1, got {z!r}")
    h = z - 1.0
    if h < 0.05:
        warnings.warn(f"slowly decaying kappa tail at z - 1 = {h:.3g}", RuntimeWarning, stacklevel=2)
    k_max = max(50.0, 40.0 / h)
    breaks = [0.0, 1.0, KAPPA_ASYMPTOTIC]
    breaks += [b for b in (1.0 / h, 10.0 / h) if KAPPA_ASYMPTOTIC < b < k_max]
    breaks.append(k_max)
    total = err = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        for lo, hi in zip(breaks, breaks[1:]):
            try:
                v, e = integrate.quad(
                    energy_integrand, lo, hi, args=(z,), epsabs=0.0,
                    epsrel=quad.rel_tol, limit=quad.max_subdivisions,
                )
            except integrate.IntegrationWarning as exc:
                raise ConvergenceError(f"kappa quadrature failed on [{lo}, {hi}]: {exc}") from exc
            total += v
            err += e
    # beyond k_max: |shape| <= 1/8 (1 + small), so the tail is bounded by the exponential alone
    tail = 0.13 * math.exp(-2.0 * k_max * h) / (2.0 * h)
    value = _PREFACTOR * total
    return EnergyEstimate(
        value=value,
        method="integral",
        abs_error_est=abs(_PREFACTOR) * (err + tail),
        extras={"z": z, "kappa_max": k_max, "tail_bound": abs(_PREFACTOR) * tail},
    )


def energy_density(z: float, quad: QuadratureSettings | None = None) -> float:
    """``u(z) = -(2/3)(2 pi)^-2 int_0^inf kappa^4 (1/kappa - 2/Q) e^{-2 kappa (z-1)} dkappa``."""
    return energy_density_estimate(z, quad).value


def energy_density_mc(z: float, n_samples: int = 200_000, seed: int = 0) -> tuple[float, float]:
    """Monte-Carlo estimate over the full ``(zeta, kx, ky)`` volume.

    Independent of the angular reduction: samples are drawn from a product of
    Laplace densities and weighted by ``-(1/2)(2 pi)^-3 k^2 (1/kappa - 2/Q)
    e^{-2 kappa (z-1)}``. ``Q`` is interpolated from a dense table. Returns
    ``(mean, standard_error)``.
    """
    from scipy.interpolate import CubicSpline

    h = float(z) - 1.0
    if not h > 0:
        raise DomainError("Monte-Carlo oracle needs z > 1")
    rng = np.random.default_rng(seed)
    rate = 2.0 * h / math.sqrt(3.0)
    pts = rng.laplace(scale=1.0 / rate, size=(n_samples, 3))
    kap = np.sqrt(np.sum(pts * pts, axis=1))
    k_cut = 60.0 / h
    grid = np.linspace(0.0, min(k_cut, 400.0), 4001)
    m = np.array([1.0] + [q_minus_two_kappa(k) / q_factor(k) for k in grid[1:]])
    spline = CubicSpline(grid, m)
    # beyond the table Q - 2k ~ -1/(4k^2) and the exponential has already won
    mk = np.where(kap <= grid[-1], spline(np.minimum(kap, grid[-1])), -0.125 / np.maximum(kap, 1.0) ** 3)
    perp2 = pts[:, 1] ** 2 + pts[:, 2] ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        f = np.where(kap > 0, perp2 / kap * mk, 0.0) * np.exp(-2.0 * kap * h)
    f *= -0.5 / (2.0 * math.pi) ** 3
    density = np.prod(0.5 * rate * np.exp(-rate * np.abs(pts)), axis=1)
    w = f / density
    return float(w.mean()), float(w.std(ddof=1) / math.sqrt(n_samples))


def large_kappa_exponent(kappas=None) -> float:
    """Fitted power ``p`` in ``|1/kappa - 2/Q| ~ kappa**p``; close to ``-4``."""
    if kappas is None:
        kappas = np.geomspace(5.0, 80.0, 24)
    kappas = np.asarray(kappas, dtype=float)
    y = [abs(q_minus_two_kappa(k) / (k * q_factor(k))) for k in kappas]
    slope, _ = np.polyfit(np.log(kappas), np.log(y), 1)
    return float(slope)


def q_sign_changes(kappas) -> list[tuple[float, float]]:
    """Intervals of the sampled grid on which ``Q`` changes sign (pole monitor)."""
    ks = list(map(float, kappas))
    q = [q_factor(k) for k in ks]
    return [(ks[i], ks[i + 1]) for i in range(len(ks) - 1) if (q[i] > 0) != (q[i + 1] > 0)]
