"""Numerical laboratory for the oscillatory integral operator

    T_lam f(x, y) = int e^{i lam (x^m t^k + y^n t^l)} psi(x, y, t) f(t) dt

and the decay of its L^2 -> L^{2k+2} norm in lam.
"""

from .phase import (
    CutoffSpec,
    PhaseParams,
    eval_cutoff,
    eval_phase,
    lower_bound_exponent,
    predicted_exponent,
)
from .quad import QuadratureSpec, QuadResult, fourier_halfline, integrate_oscillatory

__all__ = [
    "CutoffSpec",
    "PhaseParams",
    "QuadratureSpec",
    "QuadResult",
    "eval_cutoff",
    "eval_phase",
    "fourier_halfline",
    "integrate_oscillatory",
    "lower_bound_exponent",
    "predicted_exponent",
]

__version__ = "0.1.0"
