"""Analytic family machinery: the densities delta_alpha, their Fourier
transforms, the kernels K^alpha and the L^2 endpoint check at Re alpha = 1.

    delta_alpha(s) = e^{alpha^2} / Gamma(alpha) * s^{alpha-1} zeta(s)^2,  s > 0
    K^alpha(u, v, x, y) = K(u, v, x, y) * hat(delta_alpha)(lam (x^m - u^m) / 2 pi)

The factorized form of K^alpha is used throughout;
``kernel_K_alpha_direct`` evaluates the (t, s) double integral without it.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .operator import TensorGrid, kernel_K_batch
from .phase import DEFAULT_CUTOFF, CutoffSpec, PhaseParams, eval_phase, ipow
from .quad import DEFAULT_SPEC, QuadratureSpec, fourier_halfline, integrate_batch, integrate_oscillatory

# Lanczos approximation, g = 7, n = 9
_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_SQRT_2PI = math.sqrt(2.0 * math.pi)


class GammaPoleError(ValueError):
    pass


def complex_gamma(z) -> complex:
    """Gamma(z) for complex z (Lanczos, reflection below Re z = 1/2)."""
    z = complex(z)
    if z.imag == 0 and z.real <= 0 and z.real == math.floor(z.real):
        raise GammaPoleError(f"Gamma has a pole at {z.real:g}")
    if z.real < 0.5:
        return math.pi / (cmath.sin(math.pi * z) * complex_gamma(1.0 - z))
    z -= 1.0
    acc = _LANCZOS_COEF[0]
    for i in range(1, len(_LANCZOS_COEF)):
        acc += _LANCZOS_COEF[i] / (z + i)
    t = z + _LANCZOS_G + 0.5
    return _SQRT_2PI * cmath.exp((z + 0.5) * cmath.log(t) - t) * acc


@dataclass(frozen=True)
class AlphaParam:
    alpha: complex
    prefactor: complex = field(init=False)

    def __post_init__(self):
        a = complex(self.alpha)
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "prefactor", cmath.exp(a * a) / complex_gamma(a))

    @property
    def re(self) -> float:
        return self.alpha.real


def _alpha(alpha) -> AlphaParam:
    return alpha if isinstance(alpha, AlphaParam) else AlphaParam(alpha)


def delta_alpha_density(alpha, s, zeta: CutoffSpec = DEFAULT_CUTOFF):
    """delta_alpha(s); exactly 0 for s <= 0.  Needs Re alpha > 0."""
    ap = _alpha(alpha)
    if ap.re <= 0:
        raise ValueError("density representation needs Re alpha > 0")
    s_arr = np.asarray(s, dtype=float)
    out = np.zeros(s_arr.shape, dtype=complex)
    pos = s_arr > 0
    sp = s_arr[pos]
    out[pos] = ap.prefactor * np.exp((ap.alpha - 1.0) * np.log(sp)) * zeta.zeta_sq(sp)
    return complex(out) if out.ndim == 0 else out


def delta_alpha_fourier(alpha, t, zeta: CutoffSpec = DEFAULT_CUTOFF, spec: QuadratureSpec = DEFAULT_SPEC):
    """hat(delta_alpha)(t) = int e^{2 pi i s t} delta_alpha(s) ds (scalar or array t)."""
    ap = _alpha(alpha)
    res = fourier_halfline(ap.alpha, zeta.zeta_sq, t, spec, upper=zeta.zeta_outer)
    if np.ndim(t) == 0:
        return ap.prefactor * res.value
    return ap.prefactor * res.values


def kernel_K_alpha(params: PhaseParams, lam: float, alpha, u, v, x, y,
                   spec: QuadratureSpec = DEFAULT_SPEC, cutoff: CutoffSpec = DEFAULT_CUTOFF):
    """K^alpha via its factorization; vectorized over tuple arrays."""
    scalar = all(np.ndim(a) == 0 for a in (u, v, x, y))
    K = kernel_K_batch(params, lam, u, v, x, y, spec, cutoff).values
    u_, x_ = np.broadcast_arrays(np.atleast_1d(u), np.atleast_1d(x))
    arg = lam * (ipow(np.asarray(x_, dtype=float), params.m) - ipow(np.asarray(u_, dtype=float), params.m))
    arg = np.broadcast_to(arg.ravel() if arg.size == K.size else arg, K.shape) / (2.0 * math.pi)
    dhat = _dhat_unique(alpha, arg, cutoff, spec)
    out = K * dhat
    return complex(out[0]) if scalar else out


def _dhat_unique(alpha, arg, cutoff, spec):
    keys, inv = np.unique(np.asarray(arg, dtype=float), return_inverse=True)
    vals = np.atleast_1d(delta_alpha_fourier(alpha, keys, cutoff, spec))
    return vals[inv.ravel()].reshape(np.shape(arg))


def kernel_K_alpha_direct(params: PhaseParams, lam: float, alpha, u, v, x, y,
                          spec: QuadratureSpec = DEFAULT_SPEC, cutoff: CutoffSpec = DEFAULT_CUTOFF) -> complex:
    """K^alpha as the (t, s) double integral, without factorizing.

    Outer adaptive integral over s in (0, zeta_outer); for every s node the
    inner t-integral of e^{i lam [(x^m-u^m)(t^k+s) + (y^n-v^n) t^l]} psi psi is
    computed adaptively.  Intended for Re alpha >= 1, where s^{alpha-1} is
    bounded.
    """
    ap = _alpha(alpha)
    if ap.re < 1:
        raise ValueError("direct evaluation is meant for Re alpha >= 1")
    dx = ipow(float(x), params.m) - ipow(float(u), params.m)
    dy = ipow(float(y), params.n) - ipow(float(v), params.n)
    tau = float(min(cutoff.t_extent(u, v), cutoff.t_extent(x, y)))
    if tau <= 0:
        return 0j

    def inner(s):
        s = np.asarray(s, dtype=float)
        flat = s.ravel()

        def amp(idx, t):
            return cutoff.psi(u, v, t) * cutoff.psi(x, y, t)

        def phase(idx, t):
            return dx * (ipow(t, params.k) + flat[idx]) + dy * ipow(t, params.l)

        res = integrate_batch(amp, np.full(flat.size, -tau), np.full(flat.size, tau), lam, phase, spec)
        return res.values.reshape(s.shape)

    n0 = max(1, math.ceil(abs(lam * dx) * cutoff.zeta_outer / spec.osc_capacity))
    res = integrate_oscillatory(None, lambda s: delta_alpha_density(ap, s, cutoff) * inner(s),
                                (0.0, cutoff.zeta_outer), 0.0, spec, initial_panels=n0)
    return res.value


# --- L^2 endpoint ------------------------------------------------------------

def power_iteration(matvec, rmatvec, n: int, max_iter: int = 500, tol: float = 1e-12, seed: int = 0):
    """Largest singular value of A from A x and A^H y products.

    Returns (sigma, iterations, converged).
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    x /= np.linalg.norm(x)
    sigma = 0.0
    for it in range(1, max_iter + 1):
        y = matvec(x)
        new = float(np.linalg.norm(y))
        if new == 0.0:
            return 0.0, it, True
        z = rmatvec(y)
        nz = np.linalg.norm(z)
        if nz == 0.0:
            return new, it, True
        x = z / nz
        if abs(new - sigma) <= tol * new:
            return new, it, True
        sigma = new
    return sigma, max_iter, False


def _gauss_panels(lo, hi, n_panels, order=16):
    xg, wg = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, n_panels + 1)
    h = 0.5 * np.diff(edges)
    c = 0.5 * (edges[1:] + edges[:-1])
    t = (c[:, None] + h[:, None] * xg[None, :]).ravel()
    w = (h[:, None] * wg[None, :]).ravel()
    return t, w


def endpoint_grid(params: PhaseParams, lam: float, n: int = 48, box: float = 1.5) -> TensorGrid:
    """Uniform n x n grid on the box |x| <= box lam^{-1/m}, |y| <= box lam^{-1/max(n,l)}."""
    sx = box * lam ** (-1.0 / params.m)
    sy = box * lam ** (-1.0 / max(params.n, params.l))
    hx, hy = 2 * sx / n, 2 * sy / n
    x = -sx + (np.arange(n) + 0.5) * hx
    y = -sy + (np.arange(n) + 0.5) * hy
    return TensorGrid(x, y, np.full(n, hx), np.full(n, hy))


def kernel_alpha_matrix(params: PhaseParams, lam: float, alpha, grid: TensorGrid,
                        spec: QuadratureSpec = DEFAULT_SPEC, cutoff: CutoffSpec = DEFAULT_CUTOFF,
                        t_panels: int | None = None):
    """Dense K^alpha[a, b] = K^alpha(node_b, node_a).

    K is assembled as A W A^H, A[a, q] = e^{i lam S(node_a, t_q)} psi(node_a, t_q)
    on a composite 16-point Gauss-Legendre t-rule; the delta-hat factor is
    evaluated once per distinct x^m - u^m.
    """
    X, Y, _ = grid.mesh()
    tmax = float(np.max(cutoff.t_extent(X, Y)))
    if t_panels is None:
        # |d/dt (S(x,.) - S(u,.))| <= 2 rate; one 16-point panel per pi radians
        rate = lam * (params.k * np.max(np.abs(X)) ** params.m + params.l * np.max(np.abs(Y)) ** params.n)
        t_panels = 8 + math.ceil(2 * tmax * 2 * rate / math.pi)
    t, w = _gauss_panels(-tmax, tmax, t_panels)
    A = np.exp(1j * lam * eval_phase(params, X[:, None], Y[:, None], t[None, :])) * cutoff.psi(
        X[:, None], Y[:, None], t[None, :])
    K = (A * w[None, :]) @ A.conj().T
    xm = ipow(grid.x, params.m)
    diff = lam * (xm[:, None] - xm[None, :]) / (2.0 * math.pi)  # (x_i, u_i')
    dh = _dhat_unique(alpha, np.round(diff, 12), cutoff, spec)
    ny = grid.y.size
    # node a = (i, j) flattened as i * ny + j
    D = np.repeat(np.repeat(dh, ny, axis=0), ny, axis=1)
    return K * D


@dataclass
class EndpointReport:
    params: tuple
    alpha: complex
    lambdas: list
    norms: list
    iterations: list
    converged: list
    slope: float
    intercept: float
    r_squared: float
    target: float
    residual: float
    threshold: float
    passed: bool

    def to_dict(self):
        d = dict(self.__dict__)
        d["alpha"] = [self.alpha.real, self.alpha.imag]
        return d


def l2_endpoint_check(params: PhaseParams, lambdas, n_grid: int = 48, alpha=1.0, box: float = 1.5,
                      spec: QuadratureSpec = DEFAULT_SPEC, cutoff: CutoffSpec = DEFAULT_CUTOFF,
                      max_iter: int = 2000, tol: float = 1e-10, seed: int = 0, matrix_fn=None) -> EndpointReport:
    """Decay of ||T_K^alpha||_{L^2 -> L^2} on the box restricted to
    |x| <~ lam^{-1/m}, |y| <~ lam^{-1/max(n,l)}; target slope -(1/m + 1/max(n,l)).

    ``matrix_fn(lam) -> (matrix, cell_measure)`` replaces the assembly (test hook).
    """
    from .decay import fit_exponent

    ap = _alpha(alpha)
    if abs(ap.re - 1.0) > 1e-12:
        raise ValueError("the L^2 endpoint lives on Re alpha = 1")
    if n_grid * n_grid > 4096:
        raise ValueError("dense assembly limited to N_x * N_y <= 4096")
    norms, iters, conv = [], [], []
    for lam in lambdas:
        if matrix_fn is None:
            g = endpoint_grid(params, lam, n_grid, box)
            M = kernel_alpha_matrix(params, lam, ap, g, spec, cutoff)
            cell = g.wx[0] * g.wy[0]
        else:
            M, cell = matrix_fn(lam)
        Mw = M * cell
        sigma, it, ok = power_iteration(lambda z: Mw @ z, lambda z: Mw.conj().T @ z, Mw.shape[1],
                                        max_iter, tol, seed)
        norms.append(sigma)
        iters.append(it)
        conv.append(ok)
    target = 1.0 / params.m + 1.0 / max(params.n, params.l)
    if all(v > 0 for v in norms) and len(norms) >= 3:
        fit = fit_exponent(list(zip(lambdas, norms)))
        slope, intercept, r2 = fit.slope, fit.intercept, fit.r_squared
    else:
        slope = intercept = r2 = float("nan")
    residual = abs(-slope - target)
    threshold = 0.1 * target
    return EndpointReport(params.as_tuple(), ap.alpha, list(map(float, lambdas)), norms, iters, conv,
                          slope, intercept, r2, target, residual, threshold, bool(residual <= threshold))
