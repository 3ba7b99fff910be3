"""Numerical settings and result containers shared across the physics modules."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Literal

Method = Literal["cutoff", "contour", "zeta", "closed_form", "integral", "matsubara"]


@dataclass(frozen=True)
class PrecisionPolicy:
    """Accuracy contract for the special-function kernel."""

    target_rel_error: float = 1e-10
    max_terms: int = 10**6

    def __post_init__(self):
        if not self.target_rel_error > 0:
            raise ValueError("target_rel_error must be positive")
        if self.max_terms < 1:
            raise ValueError("max_terms must be >= 1")


@dataclass(frozen=True)
class QuadratureSettings:
    """Tolerances for the semi-infinite integrals.

    ``tail_cut`` is the integrand magnitude below which an infinite range is
    truncated; the neglected tail is folded into the error estimate.
    """

    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    tail_cut: float = 1e-14
    max_subdivisions: int = 500

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "tail_cut"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")


@dataclass(frozen=True)
class EnergyEstimate:
    """A Casimir energy together with the method that produced it."""

    value: float
    method: Method
    abs_error_est: float = 0.0
    temperature: float = 0.0
    extras: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.abs_error_est >= 0:
            raise ValueError("abs_error_est must be non-negative")

    def __float__(self):
        return float(self.value)

    def to_dict(self):
        return asdict(self)
