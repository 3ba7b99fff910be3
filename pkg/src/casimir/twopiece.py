"""Two-piece relativistic string: dispersion relation, spectrum, Casimir energy.

The string of total length ``L`` consists of a piece of length ``L_I`` and
tension ``T_I`` joined to a piece of length ``L_II = s L_I`` and tension
``T_II``. With ``x = T_I / T_II`` and ``F(x) = 4x / (1 - x)**2`` the
eigenfrequencies are the positive roots of::

    F sin^2(omega L / 2) + sin(omega L_I) sin(omega L_II) = 0

Three regularizations are offered. ``energy_cutoff`` and ``energy_zeta`` need
the branch parameters ``beta_i`` of an integer-``s`` spectrum; ``energy_contour``
works for any real ``s`` from the imaginary-frequency integral and is the
independent cross-check of the other two. ``k_B = c = 1`` throughout, and
every energy scales as ``1/L``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
from scipy import integrate, optimize

from .errors import ConvergenceError, DomainError, SpectrumError
from .settings import EnergyEstimate, QuadratureSettings
from .specfun import hurwitz_zeta_neg1

__all__ = [
    "TwoPieceString",
    "DispersionSpectrum",
    "CutoffSettings",
    "dispersion",
    "find_spectrum",
    "energy_cutoff",
    "energy_cutoff_raw",
    "cutoff_fit",
    "energy_cutoff_extrapolated",
    "energy_contour",
    "energy_contour_T",
    "energy_contour_T_high",
    "energy_zeta",
    "energy_x0_closed",
    "contour_integrand",
    "energy_record",
]


@dataclass(frozen=True)
class TwoPieceString:
    """Tension ratio ``x`` in [0, 1], length ratio ``s = L_II / L_I`` and total length ``L``.

    ``x = 0`` and ``x = 1`` are accepted as exact special cases (the
    two-sequence spectrum and the uniform string).
    """

    x: float
    s: float
    L: float = math.pi

    def __post_init__(self):
        if not 0.0 <= self.x <= 1.0:
            raise DomainError(f"tension ratio x must lie in [0, 1], got {self.x!r}")
        if not self.s > 0:
            raise DomainError(f"length ratio s must be positive, got {self.s!r}")
        if not self.L > 0:
            raise DomainError(f"length L must be positive, got {self.L!r}")

    @property
    def L_I(self) -> float:
        return self.L / (1.0 + self.s)

    @property
    def L_II(self) -> float:
        return self.s * self.L / (1.0 + self.s)

    @property
    def is_uniform(self) -> bool:
        return self.x == 1.0

    @property
    def F(self) -> float:
        """``4x / (1-x)**2``; infinite for the uniform string."""
        if self.is_uniform:
            return math.inf
        return 4.0 * self.x / (1.0 - self.x) ** 2

    @property
    def integer_s(self) -> int:
        si = round(self.s)
        if abs(self.s - si) > 1e-12 or si < 1:
            raise DomainError(f"branch classification needs a positive integer s, got {self.s!r}")
        return int(si)


@dataclass(frozen=True)
class CutoffSettings:
    """Exponential convergence factor ``exp(-alpha * omega)`` and mode budget."""

    alpha: float
    n_max: int = 10**6

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError("cutoff alpha must be positive")
        if self.n_max < 1:
            raise DomainError("n_max must be >= 1")


@dataclass(frozen=True)
class DispersionSpectrum:
    """Roots of the dispersion relation for integer ``s``, classified by branch.

    ``degenerate_frequencies`` lists each doubly degenerate root once
    (``omega L_I = pi n`` for odd ``s``, ``2 pi n`` for even ``s``).
    ``frequencies`` holds every root up to ``omega_max`` with multiplicity.
    """

    degenerate_frequencies: np.ndarray
    beta_params: tuple[float, ...]
    s_parity: Literal["odd", "even"]
    frequencies: np.ndarray
    omega_max: float
    s: int
    L_I: float

    def __post_init__(self):
        expected = (self.s - 1) // 2 if self.s_parity == "odd" else self.s
        if len(self.beta_params) != expected:
            raise SpectrumError(
                f"{self.s_parity} s={self.s} needs {expected} beta values, got {len(self.beta_params)}"
            )


def _theta_dispersion(x: float, s: float, theta):
    """Dispersion function in the phase variable ``theta = omega L_I``."""
    theta = np.asarray(theta, dtype=float)
    half = np.sin(0.5 * (s + 1.0) * theta) ** 2
    if x == 1.0:
        return half
    f = 4.0 * x / (1.0 - x) ** 2
    return f * half + np.sin(theta) * np.sin(s * theta)


def dispersion(cfg: TwoPieceString, omega):
    """``F sin^2(omega L/2) + sin(omega L_I) sin(omega L_II)``.

    For the uniform string (``cfg.is_uniform``) ``F`` is infinite and
    ``sin^2(omega L/2)`` is returned instead; it has the same zero set.
    Accepts scalars or arrays.
    """
    out = _theta_dispersion(cfg.x, cfg.s, np.asarray(omega, dtype=float) * cfg.L_I)
    return out if out.ndim else float(out)


def _period_roots(x: float, s: int, step_fraction: float = 8.0) -> list[float]:
    """Roots (with multiplicity) of the dispersion function inside one open period."""
    period = math.pi if s % 2 else 2.0 * math.pi
    h = math.pi / (step_fraction * (1 + s))
    n = math.ceil(period / h)
    grid = np.linspace(0.0, period, n + 1)
    f = lambda t: float(_theta_dispersion(x, s, t))
    vals = _theta_dispersion(x, s, grid)
    scale = 1.0 if x == 1.0 else 4.0 * x / (1.0 - x) ** 2 + 1.0
    roots: list[float] = []
    for j in range(1, n - 1):
        a, b = grid[j], grid[j + 1]
        fa, fb = vals[j], vals[j + 1]
        if fa == 0.0:
            continue
        if fb == 0.0 and j + 1 < n:
            roots.append(b)
            continue
        if fa * fb < 0:
            roots.append(optimize.brentq(f, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps))
    # local minima of |D| with no sign change may hide a tangency or a close pair
    for j in range(2, n - 1):
        l, m, r = vals[j - 1], vals[j], vals[j + 1]
        if not (l * m > 0 and m * r > 0 and abs(m) <= abs(l) and abs(m) <= abs(r)):
            continue
        sgn = 1.0 if m > 0 else -1.0
        res = optimize.minimize_scalar(
            lambda t: sgn * f(t), bounds=(grid[j - 1], grid[j + 1]), method="bounded",
            options={"xatol": 1e-13},
        )
        t_min, v_min = float(res.x), sgn * float(res.fun)
        if sgn * v_min < 0:
            roots.append(optimize.brentq(f, grid[j - 1], t_min, xtol=1e-15))
            roots.append(optimize.brentq(f, t_min, grid[j + 1], xtol=1e-15))
        elif abs(v_min) < 1e-12 * scale:
            roots.extend([t_min, t_min])
    return sorted(roots)


def find_spectrum(cfg: TwoPieceString, omega_max: float) -> DispersionSpectrum:
    """All roots in ``(0, omega_max]`` for integer ``s``, classified into branches.

    The roots inside the first period of ``theta = omega L_I`` (``pi`` for odd
    ``s``, ``2 pi`` for even ``s``) are bracketed on a uniform grid with step
    ``pi / (8 (1 + s))``, refined by Brent's method, and checked for tangencies
    (double roots). The rest of the spectrum follows from exact periodicity.
    """
    s = cfg.integer_s
    if not omega_max > 0:
        raise DomainError("omega_max must be positive")
    odd = s % 2 == 1
    period = math.pi if odd else 2.0 * math.pi
    expected = s - 1 if odd else 2 * s
    roots = _period_roots(cfg.x, s)
    if len(roots) != expected:
        raise SpectrumError(
            f"found {len(roots)} roots per period for s={s}, x={cfg.x}; expected {expected}"
        )
    for lo, hi in zip(roots, reversed(roots)):
        if abs(lo + hi - period) > 1e-8:
            raise SpectrumError("period roots are not symmetric; bracketing failed")
    betas = tuple(t / math.pi for t in roots[: expected // 2])

    k_max = math.floor(omega_max * cfg.L_I / period) + 1
    ks = np.arange(0, k_max + 1)
    thetas = [np.asarray(roots)[None, :] + period * ks[:, None]]
    degenerate = period * ks[1:]
    thetas.append(np.repeat(degenerate, 2)[:, None])
    all_theta = np.sort(np.concatenate([t.ravel() for t in thetas]))
    omegas = all_theta / cfg.L_I
    omegas = omegas[(omegas > 0) & (omegas <= omega_max)]
    deg = degenerate / cfg.L_I
    deg = deg[deg <= omega_max]
    return DispersionSpectrum(
        degenerate_frequencies=deg,
        beta_params=betas,
        s_parity="odd" if odd else "even",
        frequencies=omegas,
        omega_max=float(omega_max),
        s=s,
        L_I=cfg.L_I,
    )


def _check_spectrum(cfg: TwoPieceString, spectrum: DispersionSpectrum) -> int:
    s = cfg.integer_s
    if s != spectrum.s:
        raise DomainError(f"spectrum was built for s={spectrum.s}, string has s={s}")
    parity = "odd" if s % 2 else "even"
    if parity != spectrum.s_parity:
        raise DomainError("spectrum parity does not match s")
    return s


def _beta_sum_error(betas: Sequence[float], weight: float, center: float) -> float:
    # |dE/dbeta_i| * root tolerance, summed
    return sum(abs(weight * 2.0 * (2.0 * b - center)) for b in betas) * 1e-13


def energy_cutoff(cfg: TwoPieceString, spectrum: DispersionSpectrum) -> EnergyEstimate:
    """Finite part of the cutoff-regularized energy after ``alpha -> 0``.

    Odd ``s``:  ``pi s (s-1) / 12L - pi (s+1)/4L * sum(beta**2 + (1-beta)**2)``;
    even ``s``: ``pi s (2s+1) / 6L - pi (s+1)/8L * sum(beta**2 + (2-beta)**2)``.
    """
    s = _check_spectrum(cfg, spectrum)
    L = cfg.L
    b = np.asarray(spectrum.beta_params, dtype=float)
    if s % 2:
        w = math.pi * (s + 1) / (4.0 * L)
        value = math.pi * s * (s - 1) / (12.0 * L) - w * float(np.sum(b**2 + (1.0 - b) ** 2))
        err = _beta_sum_error(b, w, 1.0)
    else:
        w = math.pi * (s + 1) / (8.0 * L)
        value = math.pi * s * (2 * s + 1) / (6.0 * L) - w * float(np.sum(b**2 + (2.0 - b) ** 2))
        err = _beta_sum_error(b, w, 2.0)
    return EnergyEstimate(value, "cutoff", err)


def energy_cutoff_raw(
    cfg: TwoPieceString, spectrum: DispersionSpectrum, cut: CutoffSettings
) -> float:
    """``(1/2) sum omega_n exp(-alpha omega_n)`` over the stored spectrum.

    The result still contains the ``L / (2 pi alpha**2)`` divergence. A
    ``RuntimeWarning`` is issued when ``omega_max * alpha < 20``, i.e. when the
    truncated spectrum contaminates the small-alpha expansion.
    """
    if spectrum.omega_max * cut.alpha < 20.0:
        warnings.warn(
            f"omega_max*alpha = {spectrum.omega_max * cut.alpha:.3g} < 20: spectrum truncation "
            "contaminates the cutoff expansion",
            RuntimeWarning,
            stacklevel=2,
        )
    w = spectrum.frequencies[: cut.n_max]
    return 0.5 * float(np.sum(w * np.exp(-cut.alpha * w)))


def cutoff_fit(alphas: Sequence[float], values: Sequence[float], powers=(-2, 0)) -> np.ndarray:
    """Least-squares coefficients of ``sum_p c_p alpha**p`` fitted to ``values``."""
    a = np.asarray(alphas, dtype=float)
    design = np.stack([a**p for p in powers], axis=1)
    coef, *_ = np.linalg.lstsq(design, np.asarray(values, dtype=float), rcond=None)
    return coef


def energy_cutoff_extrapolated(
    cfg: TwoPieceString, alphas: Sequence[float] = (0.01, 0.02, 0.04)
) -> EnergyEstimate:
    """Raw cutoff sum minus the uniform string at the same ``alpha``, extrapolated to 0.

    The divergent ``1/alpha**2`` pieces cancel in the difference and the
    paired branches cancel the odd powers, so ``c0 + c2 alpha**2`` is fitted.
    """
    omega_max = 60.0 / min(alphas)
    spec = find_spectrum(cfg, omega_max)
    uniform = TwoPieceString(1.0, 1.0, cfg.L)
    spec_u = find_spectrum(uniform, omega_max)
    diffs = [
        energy_cutoff_raw(cfg, spec, CutoffSettings(a)) - energy_cutoff_raw(uniform, spec_u, CutoffSettings(a))
        for a in alphas
    ]
    c0, c2 = cutoff_fit(alphas, diffs, powers=(0, 2))
    resid = float(np.max(np.abs(c0 + c2 * np.asarray(alphas) ** 2 - diffs))) if len(alphas) > 2 else abs(c2) * min(alphas) ** 2
    return EnergyEstimate(float(c0), "cutoff", resid, extras={"c2": float(c2)})


def _ratio_minus_one(a, s: float):
    """``sinh(a) sinh(s a) / sinh^2((s+1) a / 2) - 1`` for ``a >= 0`` without cancellation."""
    a = np.asarray(a, dtype=float)
    out = np.empty_like(a)
    small = a <= 1.0
    if np.any(small):
        t = a[small]
        with np.errstate(invalid="ignore", divide="ignore"):
            r = np.expm1(-2 * t) * np.expm1(-2 * s * t) / np.expm1(-(s + 1) * t) ** 2
        r = np.where(t == 0.0, 4.0 * s / (s + 1.0) ** 2, r)
        out[small] = r - 1.0
    if np.any(~small):
        t = a[~small]
        u, v, w = np.exp(-2 * t), np.exp(-2 * s * t), np.exp(-(s + 1) * t)
        out[~small] = (-u - v + u * v + 2 * w - w * w) / (1.0 - w) ** 2
    return out


def contour_integrand(cfg: TwoPieceString, xi):
    """``ln |(F + R(xi)) / (F + 1)|`` with ``R = sinh(xi L_I) sinh(s xi L_I) / sinh^2((s+1) xi L_I / 2)``.

    At ``xi = 0`` the analytic limit ``ln((F + 4s/(s+1)^2) / (F + 1))`` is used.
    """
    xi = np.asarray(xi, dtype=float)
    if cfg.is_uniform:
        out = np.zeros_like(xi)
    else:
        out = np.log1p(_ratio_minus_one(xi * cfg.L_I, cfg.s) / (cfg.F + 1.0))
    return out if out.ndim else float(out)


def _contour_cut(cfg: TwoPieceString, tail_cut: float) -> float:
    """Upper limit in ``a = xi L_I`` beyond which the integrand is below ``tail_cut``."""
    m = min(1.0, cfg.s)
    a = max(1.0, math.log(4.0 / ((cfg.F + 1.0) * tail_cut)) / (2.0 * m))
    f = lambda t: abs(float(np.log1p(_ratio_minus_one(np.array([t]), cfg.s)[0] / (cfg.F + 1.0))))
    while f(a) > tail_cut:
        a *= 1.5
        if a > 1e6:
            raise ConvergenceError("contour integrand does not decay")
    return a


def energy_contour(cfg: TwoPieceString, quad: QuadratureSettings | None = None) -> EnergyEstimate:
    """Zero-temperature energy from the imaginary-frequency integral.

    ``E = (1/2 pi) int_0^inf ln|(F + R(xi)) / (F + 1)| dxi``. Valid for any
    real ``s > 0``; the uniform string returns exactly 0.
    """
    quad = quad or QuadratureSettings()
    if cfg.is_uniform:
        return EnergyEstimate(0.0, "contour", 0.0)
    a_max = _contour_cut(cfg, quad.tail_cut)
    F1 = cfg.F + 1.0
    s = cfg.s
    g = lambda a: float(np.log1p(_ratio_minus_one(np.array([a]), s)[0] / F1))
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(
                g, 0.0, a_max, epsabs=quad.abs_tol, epsrel=quad.rel_tol, limit=quad.max_subdivisions
            )
        except integrate.IntegrationWarning as exc:
            raise ConvergenceError(f"contour quadrature failed: {exc}") from exc
    tail = abs(g(a_max)) / (2.0 * min(1.0, s))
    scale = 1.0 / (2.0 * math.pi * cfg.L_I)
    return EnergyEstimate(val * scale, "contour", (err + tail) * scale, extras={"xi_max": a_max / cfg.L_I})


def energy_contour_T(
    cfg: TwoPieceString, T: float, n_max: int | None = None, rel_stop: float = 1e-14
) -> EnergyEstimate:
    """Finite-temperature energy as a Matsubara sum.

    ``E(T) = T sum'_{n>=0} ln|(F + R(xi_n)) / (F + 1)|`` with ``xi_n = 2 pi n T``
    and the ``n = 0`` term at half weight. The sum is extended in blocks until
    the last term falls below ``rel_stop`` times the partial sum (or
    ``n_max`` terms when given).
    """
    if not T > 0:
        raise DomainError("temperature must be positive")
    if cfg.is_uniform:
        return EnergyEstimate(0.0, "contour", 0.0, temperature=T)
    limit = n_max if n_max is not None else 10**8
    step = 2.0 * math.pi * T * cfg.L_I
    f0 = float(contour_integrand(cfg, 0.0))
    total = 0.5 * f0
    n0 = 1
    block = 256
    last = abs(f0)
    while n0 <= limit:
        n = np.arange(n0, min(n0 + block, limit + 1))
        terms = np.log1p(_ratio_minus_one(n * step, cfg.s) / (cfg.F + 1.0))
        total += float(terms.sum())
        last = abs(float(terms[-1]))
        n0 = int(n[-1]) + 1
        if last <= rel_stop * max(abs(total), 1e-300):
            break
        block = min(block * 2, 1 << 20)
    else:
        if n_max is None:
            raise ConvergenceError("Matsubara sum did not converge")
    ratio = math.exp(-2.0 * min(1.0, cfg.s) * step)
    tail = last * ratio / (1.0 - ratio) if ratio < 1 else math.inf
    return EnergyEstimate(T * total, "matsubara", T * tail, temperature=T, extras={"n_terms": n0})


def energy_contour_T_high(cfg: TwoPieceString, T: float) -> float:
    """High-temperature limit ``(T/2) ln|(F + 4s/(s+1)^2) / (F + 1)|``."""
    if cfg.is_uniform:
        return 0.0
    F = cfg.F
    return 0.5 * T * math.log(abs((F + 4.0 * cfg.s / (cfg.s + 1.0) ** 2) / (F + 1.0)))


def energy_zeta(cfg: TwoPieceString, spectrum: DispersionSpectrum) -> EnergyEstimate:
    """Zeta-regularized energy assembled from ``zeta_H(-1, a)``.

    Odd ``s``: the degenerate branch ``omega L_I = pi n`` (multiplicity 2) gives
    ``(pi/L_I) zeta_H(-1, 1)``; each branch pair ``pi(n + beta)``,
    ``pi(n + 1 - beta)`` gives ``(pi/2L_I)[zeta_H(-1, beta) + zeta_H(-1, 1-beta)]``.
    Even ``s`` has period ``2 pi`` in ``omega L_I``, so the degenerate branch
    gives ``(2 pi/L_I) zeta_H(-1, 1)`` and each pair
    ``(pi/L_I)[zeta_H(-1, beta/2) + zeta_H(-1, 1 - beta/2)]``. The uniform
    string ``(2 pi/L) zeta_H(-1, 1)`` is subtracted.
    """
    s = _check_spectrum(cfg, spectrum)
    L_I = cfg.L_I
    z1 = hurwitz_zeta_neg1(1.0)
    if s % 2:
        total = math.pi / L_I * z1
        for b in spectrum.beta_params:
            total += math.pi / (2.0 * L_I) * (hurwitz_zeta_neg1(b) + hurwitz_zeta_neg1(1.0 - b))
        w, center = math.pi * (s + 1) / (4.0 * cfg.L), 1.0
    else:
        total = 2.0 * math.pi / L_I * z1
        for b in spectrum.beta_params:
            total += math.pi / L_I * (hurwitz_zeta_neg1(0.5 * b) + hurwitz_zeta_neg1(1.0 - 0.5 * b))
        w, center = math.pi * (s + 1) / (8.0 * cfg.L), 2.0
    uniform = 2.0 * math.pi / cfg.L * z1
    err = _beta_sum_error(spectrum.beta_params, w, center)
    return EnergyEstimate(total - uniform, "zeta", err)


def energy_x0_closed(s: float, L: float = math.pi) -> float:
    """Closed form for vanishing tension ratio: ``-pi/(24 L) (s + 1/s - 2)``."""
    if not s > 0 or not L > 0:
        raise DomainError("s and L must be positive")
    # pi/L first, so that L = pi reproduces the rational values exactly
    return -(math.pi / L) * (s + 1.0 / s - 2.0) / 24.0


def energy_record(cfg: TwoPieceString, est: EnergyEstimate) -> dict:
    """JSON-ready record ``{x, s, L, T, method, value, abs_error_est}``."""
    return {
        "x": cfg.x,
        "s": cfg.s,
        "L": cfg.L,
        "T": est.temperature,
        "method": est.method,
        "value": est.value,
        "abs_error_est": est.abs_error_est,
    }
