"""Phase family S(x, y, t) = x^m t^k + y^n t^l, smooth cutoffs, predicted exponents."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np


class NormalizationError(ValueError):
    """Raised when the exponents violate the k > l normalization."""


def ipow(x, e: int):
    """x**e for a nonnegative integer e by repeated squaring (scalar or array)."""
    if e < 0:
        raise ValueError("exponent must be nonnegative")
    result = np.ones_like(x) if isinstance(x, np.ndarray) else 1.0
    base = x
    while e:
        if e & 1:
            result = result * base
        e >>= 1
        if e:
            base = base * base
    return result


@dataclass(frozen=True)
class PhaseParams:
    """Exponent quadruple of the phase x^m t^k + y^n t^l.

    Construction enforces k > l; use ``PhaseParams.normalized`` to swap the
    two monomials when the caller has them the other way round.
    """

    m: int
    n: int
    k: int
    l: int  # noqa: E741

    def __post_init__(self):
        for name in ("m", "n", "k", "l"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        if self.k <= self.l:
            raise NormalizationError(
                f"k > l required (got k={self.k}, l={self.l}); swap the roles of the two monomials"
            )

    @classmethod
    def normalized(cls, m: int, n: int, k: int, l: int) -> "PhaseParams":  # noqa: E741
        """Swap (x^m t^k) <-> (y^n t^l) if needed so that k > l."""
        if k < l:
            m, n, k, l = n, m, l, k
        return cls(m, n, k, l)

    @property
    def p(self) -> int:
        return 2 * self.k + 2

    @property
    def delta_exact(self) -> Fraction:
        return Fraction(1, 2 * (self.k + 1)) * (Fraction(1, self.m) + Fraction(1, max(self.n, self.l)))

    @property
    def delta_pred(self) -> float:
        return float(self.delta_exact)

    @property
    def sharp(self) -> bool:
        return self.l <= self.n

    def delta_low(self, p: float | None = None) -> float:
        return lower_bound_exponent(self, self.p if p is None else p)

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.m, self.n, self.k, self.l)


def eval_phase(params: PhaseParams, x, y, t):
    """x^m t^k + y^n t^l (vectorized; integer powers by squaring)."""
    return ipow(x, params.m) * ipow(t, params.k) + ipow(y, params.n) * ipow(t, params.l)


def predicted_exponent(params: PhaseParams) -> tuple[int, float]:
    """(p, delta) of the decay bound ||T_lam||_{L^2 -> L^p} <~ lam^{-delta}."""
    if params.k <= params.l:  # unreachable through the constructor, kept for duck-typed callers
        raise NormalizationError("k > l required")
    return params.p, params.delta_pred


def lower_bound_exponent(params: PhaseParams, p: float) -> float:
    """Exponent (1/p)(1/m + 1/n) certified by the chi_[0,1] test function."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if isinstance(p, (int, np.integer)) or float(p).is_integer():
        return float(Fraction(1, int(p)) * (Fraction(1, params.m) + Fraction(1, params.n)))
    return (1.0 / params.m + 1.0 / params.n) / p


# --- cutoffs -----------------------------------------------------------------

def _bump_exp(x):
    # exp(-1/x) for x > 0, 0 otherwise
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def smooth_step(u):
    """C^infinity step: 1 for u <= 0, 0 for u >= 1, strictly decreasing between."""
    u = np.asarray(u, dtype=float)
    a = _bump_exp(1.0 - u)
    b = _bump_exp(u)
    return a / (a + b)


@dataclass(frozen=True)
class CutoffSpec:
    """Radial bump psi and one-dimensional cutoff zeta.

    psi(x, y, t) = 1 for |(x, y, t)| <= inner, 0 for |(x, y, t)| >= outer.
    zeta(s) = 1 for |s| <= zeta_inner, 0 for |s| >= zeta_outer.
    ``frozen=True`` replaces psi by the constant 1 (test mode for translation
    structure checks); zeta is unaffected.
    """

    inner: float = 0.5
    outer: float = 1.0
    zeta_inner: float = 1.0
    zeta_outer: float = 2.0
    frozen: bool = False

    def __post_init__(self):
        if not (0 < self.inner < self.outer):
            raise ValueError("need 0 < inner < outer")
        if not (0 < self.zeta_inner < self.zeta_outer):
            raise ValueError("need 0 < zeta_inner < zeta_outer")

    def radial(self, r):
        return smooth_step((np.asarray(r, dtype=float) - self.inner) / (self.outer - self.inner))

    def psi(self, x, y, t):
        if self.frozen:
            return np.ones(np.broadcast(x, y, t).shape)
        r = np.sqrt(np.asarray(x) ** 2 + np.asarray(y) ** 2 + np.asarray(t) ** 2)
        return self.radial(r)

    def zeta(self, s):
        s = np.abs(np.asarray(s, dtype=float))
        return smooth_step((s - self.zeta_inner) / (self.zeta_outer - self.zeta_inner))

    def zeta_sq(self, s):
        z = self.zeta(s)
        return z * z

    def t_extent(self, x, y):
        """Half-length of the t-interval where psi(x, y, .) can be nonzero."""
        if self.frozen:
            return self.outer
        r2 = np.asarray(x, dtype=float) ** 2 + np.asarray(y, dtype=float) ** 2
        return np.sqrt(np.clip(self.outer ** 2 - r2, 0.0, None))


DEFAULT_CUTOFF = CutoffSpec()


def eval_cutoff(spec: CutoffSpec, x, y, t):
    out = spec.psi(x, y, t)
    return float(out) if np.ndim(out) == 0 else out
