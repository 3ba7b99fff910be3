"""Closed string of 2N equal-length pieces with alternating tensions.

With ``alpha = (1-x)/(1+x)`` and ``d = 1 - alpha**2 = 4x/(1+x)**2`` the
recursion matrix ``Lambda`` has ``det = d**2`` and, at imaginary phase ``iq``,
trace ``2(cosh q - alpha**2)``. Writing its eigenvalues as ``d e^{+-mu}``
with ``cosh mu = 1 + 2 sinh^2(q/2)/d`` turns the energy integrand into::

    ln| (2 d^N - lambda_+^N - lambda_-^N) / (4 sinh^2(Nq/2)) |
        = N ln d + 2 ln sinh(N mu/2) - 2 ln sinh(N q/2)

which has no cancellation anywhere on ``q >= 0``. The literal power-sum
form is kept (``power_sum``, ``numerator_direct``) as an independent check.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate, optimize

from .errors import ConvergenceError, DomainError
from .settings import EnergyEstimate, QuadratureSettings

__all__ = [
    "NPieceString",
    "lambda_pm",
    "power_sum",
    "numerator_direct",
    "integrand",
    "energy_zero_T",
    "energy_finite_T",
    "energy_closed_x0",
    "scaling_f",
    "scaling_fit",
    "transfer_matrix",
    "det_m_minus_one",
    "npiece_record",
]


@dataclass(frozen=True)
class NPieceString:
    """``N`` piece pairs (``2N`` pieces), tension ratio ``x`` in [0, 1], total length ``L``."""

    N: int
    x: float
    L: float = math.pi

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise DomainError(f"N must be an integer >= 1, got {self.N!r}")
        if not 0.0 <= self.x <= 1.0:
            raise DomainError(f"tension ratio x must lie in [0, 1], got {self.x!r}")
        if not self.L > 0:
            raise DomainError("L must be positive")

    @property
    def alpha(self) -> float:
        return (1.0 - self.x) / (1.0 + self.x)

    @property
    def d(self) -> float:
        """``1 - alpha**2``, computed as ``4x/(1+x)**2`` to keep digits near x = 0."""
        return 4.0 * self.x / (1.0 + self.x) ** 2

    def phase(self, omega: float) -> float:
        """Per-piece phase ``p_N = omega L / N``."""
        return omega * self.L / self.N


def lambda_pm(alpha: float, q) -> tuple:
    """Eigenvalues ``lambda_+-`` of the recursion matrix at imaginary phase ``iq``.

    ``cosh q - alpha**2 +- sqrt((cosh q - alpha**2)**2 - (1 - alpha**2)**2)``,
    with the smaller root taken as ``(1-alpha**2)**2 / lambda_+`` so that the
    product identity holds to rounding.
    """
    if not 0.0 <= alpha <= 1.0:
        raise DomainError("alpha must lie in [0, 1]")
    q = np.asarray(q, dtype=float)
    if np.any(q < 0):
        raise DomainError("q must be non-negative")
    d = (1.0 - alpha) * (1.0 + alpha)
    # cosh q - alpha^2 = d + 2 sinh^2(q/2); difference of squares factorises
    sh2 = 2.0 * np.sinh(0.5 * q) ** 2
    c = d + sh2
    disc = sh2 * (sh2 + 2.0 * d)
    assert np.all(disc >= 0)
    plus = c + np.sqrt(disc)
    with np.errstate(divide="ignore", invalid="ignore"):
        minus = np.where(plus > 0, d * d / plus, 0.0)
    if plus.ndim == 0:
        return float(plus), float(minus)
    return plus, minus


def power_sum(sigma, prod, N: int):
    """``lambda_+^N + lambda_-^N`` from ``sigma = lambda_+ + lambda_-`` and ``prod = lambda_+ lambda_-``.

    Newton recurrence ``p_k = sigma p_{k-1} - prod p_{k-2}``.
    """
    sigma = np.asarray(sigma, dtype=float)
    p_prev, p = np.full_like(sigma, 2.0), sigma.copy()
    if N == 0:
        return p_prev
    for _ in range(N - 1):
        p_prev, p = p, sigma * p - prod * p_prev
    return p


def numerator_direct(alpha: float, q, N: int):
    """``2 (1-alpha**2)**N - (lambda_+^N + lambda_-^N)`` via ``power_sum`` (test oracle)."""
    q = np.asarray(q, dtype=float)
    d = 1.0 - alpha * alpha
    return 2.0 * d**N - power_sum(2.0 * (np.cosh(q) - alpha * alpha), d * d, N)


def _log_sinh(y):
    y = np.asarray(y, dtype=float)
    big = y > 1.0
    out = np.empty_like(y)
    out[big] = y[big] + np.log1p(-np.exp(-2.0 * y[big])) - math.log(2.0)
    out[~big] = np.log(np.sinh(y[~big]))
    return out


def integrand(cfg: NPieceString, q):
    """``ln|(2 d^N - lambda_+^N - lambda_-^N) / (4 sinh^2(Nq/2))|`` for ``q >= 0``.

    The ``q = 0`` value is the limit ``(N-1) ln d``; for ``x = 0`` that limit
    is ``-inf`` (integrable logarithmic singularity).
    """
    q = np.asarray(q, dtype=float)
    N = cfg.N
    out = np.empty_like(q)
    zero = q == 0.0
    small = (q > 0.0) & (q <= 1.0)
    large = q > 1.0
    ql, qs = q[large], q[small]
    r = np.exp(-ql)
    if cfg.x == 0.0:
        out[zero] = -math.inf if N > 1 else 0.0
        out[small] = 2.0 * (N * (math.log(2.0) + _log_sinh(0.5 * qs)) - math.log(2.0) - _log_sinh(0.5 * N * qs))
        out[large] = 2.0 * (N * np.log1p(-r) - np.log1p(-(r**N)))
        return out if out.ndim else float(out)
    d = cfg.d
    out[zero] = (N - 1) * math.log(d)
    z = 2.0 * np.sinh(0.5 * qs) ** 2 / d
    mu = np.log1p(z + np.sqrt(z * (z + 2.0)))
    out[small] = N * math.log(d) + 2.0 * (_log_sinh(0.5 * N * mu) - _log_sinh(0.5 * N * qs))
    # q > 1: with r = e^-q, d e^{mu - q} = 1 + D and every term of D is O(r)
    eps = 4.0 * d * r / (1.0 - r) ** 2
    D = -r * (1.0 + cfg.alpha**2) + r * r + 2.0 * d * r / (1.0 + np.sqrt(1.0 + eps))
    e_mu_N = (r * d / (1.0 + D)) ** N
    out[large] = N * np.log1p(D) + 2.0 * (np.log1p(-e_mu_N) - np.log1p(-(r**N)))
    return out if out.ndim else float(out)


def _tail_cut(cfg: NPieceString, tail_cut: float) -> float:
    q = 8.0
    while abs(float(integrand(cfg, q))) > tail_cut:
        q *= 1.25
        if q > 800.0:
            raise ConvergenceError("2N-piece integrand does not decay")
    return q


def _quad(f, a: float, b: float, quad: QuadratureSettings):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            return integrate.quad(f, a, b, epsabs=quad.abs_tol, epsrel=quad.rel_tol, limit=quad.max_subdivisions)
        except integrate.IntegrationWarning as exc:
            raise ConvergenceError(f"2N-piece quadrature failed: {exc}") from exc


def energy_zero_T(cfg: NPieceString, quad: QuadratureSettings | None = None) -> EnergyEstimate:
    """``E_N(x) = (N / 2 pi L) int_0^inf integrand(q) dq``.

    ``N = 1`` and ``x = 1`` return exactly 0. The range is split at ``q = 1``
    so the logarithmic endpoint singularity at ``x = 0`` sits alone in the
    first panel.
    """
    quad = quad or QuadratureSettings()
    if cfg.N == 1 or cfg.x == 1.0:
        return EnergyEstimate(0.0, "integral", 0.0)
    q_max = _tail_cut(cfg, quad.tail_cut)
    f = lambda q: float(integrand(cfg, q))
    v1, e1 = _quad(f, 0.0, 1.0, quad)
    v2, e2 = _quad(f, 1.0, q_max, quad)
    scale = cfg.N / (2.0 * math.pi * cfg.L)
    tail = abs(f(q_max))  # integrand decays at least like e^{-q}
    return EnergyEstimate((v1 + v2) * scale, "integral", (e1 + e2 + tail) * scale, extras={"q_max": q_max})


def energy_closed_x0(N: int, L: float = math.pi) -> float:
    """``E_N(0) = -pi (N**2 - 1) / (6 L)``."""
    if N < 1 or not L > 0:
        raise DomainError("N >= 1 and L > 0 required")
    return -math.pi * (N * N - 1) / (6.0 * L)


def energy_finite_T(
    cfg: NPieceString, T: float, n_max: int | None = None, rel_stop: float = 1e-14
) -> EnergyEstimate:
    """Matsubara sum ``T sum'_n integrand(xi_n L / N)``, ``xi_n = 2 pi n T``, ``n = 0`` at half weight.

    The ``x = 0`` string has a divergent static term and raises ``DomainError``.
    """
    if not T > 0:
        raise DomainError("temperature must be positive")
    if cfg.N == 1 or cfg.x == 1.0:
        return EnergyEstimate(0.0, "matsubara", 0.0, temperature=T)
    if cfg.x == 0.0:
        raise DomainError("the n = 0 Matsubara term diverges for x = 0")
    step = 2.0 * math.pi * T * cfg.L / cfg.N
    total = 0.5 * float(integrand(cfg, 0.0))
    limit = n_max if n_max is not None else 10**8
    n0, block, last = 1, 256, abs(total)
    while n0 <= limit:
        n = np.arange(n0, min(n0 + block, limit + 1))
        terms = integrand(cfg, n * step)
        total += float(terms.sum())
        last = abs(float(terms[-1]))
        n0 = int(n[-1]) + 1
        if last <= rel_stop * max(abs(total), 1e-300):
            break
        block = min(2 * block, 1 << 20)
    else:
        if n_max is None:
            raise ConvergenceError("Matsubara sum did not converge")
    ratio = math.exp(-step)
    tail = last * ratio / (1.0 - ratio) if ratio < 1 else math.inf
    return EnergyEstimate(T * total, "matsubara", T * tail, temperature=T, extras={"n_terms": n0})


def scaling_f(N: int, x: float, quad: QuadratureSettings | None = None) -> float:
    """``f_N(x) = E_N(x) / E_N(0)``; independent of ``L``."""
    if N < 2:
        raise DomainError("f_N needs N >= 2 (E_1 vanishes identically)")
    e = energy_zero_T(NPieceString(N, x, math.pi), quad).value
    return e / energy_closed_x0(N, math.pi)


def scaling_fit(N: int, xs: Sequence[float], quad: QuadratureSettings | None = None) -> dict:
    """Best-fit exponent ``p`` of ``(1 - sqrt x)**p`` to ``f_N`` on ``xs``.

    Returns the exponent, its maximal residual, and the maximal residual of the
    fixed exponent 5/2.
    """
    xs = np.asarray(xs, dtype=float)
    f = np.array([scaling_f(N, x, quad) for x in xs])
    base = 1.0 - np.sqrt(xs)
    res = optimize.minimize_scalar(lambda p: float(np.sum((f - base**p) ** 2)), bounds=(0.5, 6.0), method="bounded")
    p = float(res.x)
    return {
        "exponent": p,
        "max_residual": float(np.max(np.abs(f - base**p))),
        "max_residual_5_2": float(np.max(np.abs(f - base**2.5))),
        "f": f,
    }


def transfer_matrix(alpha: float, p: complex) -> np.ndarray:
    """``Lambda(alpha, p) = [[a, b], [b*, a*]]``, ``a = e^{-ip} - alpha**2``, ``b = alpha (e^{-ip} - 1)``.

    For complex ``p`` the starred entries are the analytic continuations
    ``e^{+ip} - alpha**2`` and ``alpha (e^{+ip} - 1)``.
    """
    e_m, e_p = np.exp(-1j * p), np.exp(1j * p)
    return np.array([[e_m - alpha**2, alpha * (e_m - 1.0)], [alpha * (e_p - 1.0), e_p - alpha**2]])


def det_m_minus_one(cfg: NPieceString, p: complex) -> complex:
    """``Det[M_2N - 1]`` with ``M_2N = d**-N Lambda**N`` (test oracle for small N)."""
    m = np.linalg.matrix_power(transfer_matrix(cfg.alpha, p), cfg.N) / cfg.d**cfg.N
    return complex(np.linalg.det(m - np.eye(2)))


def npiece_record(cfg: NPieceString, est: EnergyEstimate, f_N: float | None = None) -> dict:
    """JSON-ready record ``{N, x, L, T, value, f_N, fit_residual}``."""
    fit = None if f_N is None else f_N - (1.0 - math.sqrt(cfg.x)) ** 2.5
    return {
        "N": cfg.N,
        "x": cfg.x,
        "L": cfg.L,
        "T": est.temperature,
        "value": est.value,
        "f_N": f_N,
        "fit_residual": fit,
    }
