"""Casimir energies of piecewise-uniform relativistic strings.

Submodules:

* ``specfun``  Airy pair, Dedekind eta, Jacobi theta-3, Hurwitz zeta at -1
* ``twopiece`` two-piece string: spectrum and energies (cutoff, contour, zeta)
* ``npiece``   2N-piece alternating string and its scaling function
* ``thermo``   quantized string free energy and Hagedorn temperature
* ``qft``      scalar field in a plateau potential
* ``cli``      command-line front end
"""
from .errors import (
    CasimirError,
    ConvergenceError,
    DomainError,
    HagedornViolation,
    SaturationError,
    SpectrumError,
)
from .settings import EnergyEstimate, PrecisionPolicy, QuadratureSettings

__version__ = "0.1.0"

__all__ = [
    "CasimirError",
    "ConvergenceError",
    "DomainError",
    "HagedornViolation",
    "SaturationError",
    "SpectrumError",
    "EnergyEstimate",
    "PrecisionPolicy",
    "QuadratureSettings",
    "__version__",
]
