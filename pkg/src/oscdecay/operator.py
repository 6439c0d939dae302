"""Discretized T_lam, its adjoint, the TT* kernel K and the operator T_K.

Conventions
-----------
* t-integrals are done by adaptive quadrature (the oscillation lives in t);
* (u, v)-integrals are midpoint Riemann sums with the cell weights of the grid.
* ``kernel_K(params, lam, u, v, x, y)`` is

      int e^{i lam [(x^m - u^m) t^k + (y^n - v^n) t^l]} psi(u, v, t) psi(x, y, t) dt

  so that  T_K g(x, y) = sum_{(u,v)} K(u, v, x, y) g(u, v) du dv  equals
  T_lam T_lam^* g and  <T_K g, g> = ||T_lam^* g||^2.
"""

from __future__ import annotations

import csv
import math
import threading
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .phase import DEFAULT_CUTOFF, CutoffSpec, PhaseParams, eval_phase, ipow
from .quad import DEFAULT_SPEC, QuadratureSpec, integrate_batch, integrate_oscillatory


class ResolutionWarning(UserWarning):
    """Grid too coarse for the oscillation of e^{i lam S} in (u, v)."""


@dataclass(frozen=True)
class TensorGrid:
    """Tensor product of two 1-D midpoint layouts (nodes plus cell widths)."""

    x: np.ndarray
    y: np.ndarray
    wx: np.ndarray
    wy: np.ndarray

    def __post_init__(self):
        for name in ("x", "y", "wx", "wy"):
            object.__setattr__(self, name, np.ascontiguousarray(getattr(self, name), dtype=float))
        if self.x.shape != self.wx.shape or self.y.shape != self.wy.shape:
            raise ValueError("node/width shape mismatch")
        if self.x.size < 2 or self.y.size < 2:
            raise ValueError("need at least 2 nodes per axis")

    @property
    def shape(self):
        return (self.x.size, self.y.size)

    @property
    def size(self):
        return self.x.size * self.y.size

    def mesh(self):
        """Flattened node coordinates and cell measures, C order over (i, j)."""
        X, Y = np.meshgrid(self.x, self.y, indexing="ij")
        W = np.outer(self.wx, self.wy)
        return X.ravel(), Y.ravel(), W.ravel()

    def key(self):
        return (self.x.tobytes(), self.y.tobytes(), self.wx.tobytes(), self.wy.tobytes())


@dataclass(frozen=True)
class GridSpec:
    """Uniform cell-centred grid on [x_lo, x_hi] x [y_lo, y_hi] plus a t-layout."""

    x_lo: float = -1.25
    x_hi: float = 1.25
    y_lo: float = -1.25
    y_hi: float = 1.25
    t_lo: float = -1.0
    t_hi: float = 1.0
    nx: int = 32
    ny: int = 32
    nt: int = 64

    def __post_init__(self):
        if min(self.nx, self.ny, self.nt) < 2:
            raise ValueError("grid counts must be >= 2")
        if not (self.x_lo < self.x_hi and self.y_lo < self.y_hi and self.t_lo < self.t_hi):
            raise ValueError("empty grid range")

    @property
    def hx(self):
        return (self.x_hi - self.x_lo) / self.nx

    @property
    def hy(self):
        return (self.y_hi - self.y_lo) / self.ny

    @property
    def ht(self):
        return (self.t_hi - self.t_lo) / self.nt

    def tensor(self) -> TensorGrid:
        x = self.x_lo + (np.arange(self.nx) + 0.5) * self.hx
        y = self.y_lo + (np.arange(self.ny) + 0.5) * self.hy
        return TensorGrid(x, y, np.full(self.nx, self.hx), np.full(self.ny, self.hy))

    def t_nodes(self) -> np.ndarray:
        return self.t_lo + (np.arange(self.nt) + 0.5) * self.ht


def _as_tensor(grid) -> TensorGrid:
    return grid.tensor() if isinstance(grid, GridSpec) else grid


@dataclass
class SampledField:
    grid: TensorGrid
    values: np.ndarray
    flags: np.ndarray | None = None  # True where the node's quadrature did not converge

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex).reshape(self.grid.shape)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("SampledField values must be finite")
        if self.flags is not None:
            self.flags = np.asarray(self.flags, dtype=bool).reshape(self.grid.shape)

    def inner(self, other: "SampledField") -> complex:
        """<self, other> = sum self * conj(other) dx dy."""
        W = np.outer(self.grid.wx, self.grid.wy)
        return complex(np.sum(self.values * np.conj(other.values) * W))

    def __mul__(self, c):
        return SampledField(self.grid, self.values * c, self.flags)

    __rmul__ = __mul__


@dataclass
class SampledLine:
    t: np.ndarray
    values: np.ndarray
    weights: np.ndarray | None = None
    resolved: bool = True
    notes: list = field(default_factory=list)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != self.t.shape:
            raise ValueError("SampledLine needs one value per node")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("SampledLine values must be finite")

    def interpolant(self):
        """Cubic interpolant of the samples, zero outside the node range."""
        re = CubicSpline(self.t, self.values.real)
        im = CubicSpline(self.t, self.values.imag)
        lo, hi = self.t[0], self.t[-1]

        def f(t):
            t = np.asarray(t, dtype=float)
            inside = (t >= lo) & (t <= hi)
            return np.where(inside, re(t) + 1j * im(t), 0.0)

        return f


# --- T_lam -------------------------------------------------------------------

def apply_T(params: PhaseParams, lam: float, f, grid, spec: QuadratureSpec = DEFAULT_SPEC,
            cutoff: CutoffSpec = DEFAULT_CUTOFF, t_range=None) -> SampledField:
    """Evaluate T_lam f at every node of ``grid``.

    ``f`` is a vectorized callable of t or a SampledLine (cubic interpolation).
    The t-integral runs over ``t_range`` (default: the line's node range, or
    [-1, 1]) intersected with the support of psi(x, y, .).
    """
    g = _as_tensor(grid)
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    if isinstance(f, SampledLine):
        fun = f.interpolant()
        if t_range is None:
            t_range = (f.t[0], f.t[-1])
    else:
        fun = f
    if t_range is None:
        t_range = (-cutoff.outer, cutoff.outer)
    X, Y, _ = g.mesh()
    tau = cutoff.t_extent(X, Y)
    a = np.maximum(t_range[0], -tau)
    b = np.minimum(t_range[1], tau)
    live = b > a
    values = np.zeros(X.size, dtype=complex)
    flags = np.zeros(X.size, dtype=bool)
    if np.any(live):
        Xl, Yl = X[live], Y[live]

        def amp(idx, t):
            return cutoff.psi(Xl[idx], Yl[idx], t) * fun(t)

        def phase(idx, t):
            return eval_phase(params, Xl[idx], Yl[idx], t)

        res = integrate_batch(amp, a[live], b[live], lam, phase, spec)
        values[live] = res.values
        flags[live] = ~res.converged
    return SampledField(g, values.reshape(g.shape), flags.reshape(g.shape))


def _check_resolution(params, lam, g: TensorGrid, t_max):
    """lam * h * sup|d/du phase| <= 1/4 in both u and v; returns messages."""
    msgs = []
    U = np.max(np.abs(g.x))
    V = np.max(np.abs(g.y))
    du = params.m * U ** (params.m - 1) * t_max ** params.k
    dv = params.n * V ** (params.n - 1) * t_max ** params.l
    rx = lam * np.max(g.wx) * du
    ry = lam * np.max(g.wy) * dv
    if rx > 0.25:
        msgs.append(f"u-resolution {rx:.3g} > 1/4 at lambda={lam:g}")
    if ry > 0.25:
        msgs.append(f"v-resolution {ry:.3g} > 1/4 at lambda={lam:g}")
    return msgs


def adjoint_function(params: PhaseParams, lam: float, g: SampledField,
                     cutoff: CutoffSpec = DEFAULT_CUTOFF, chunk: int = 2_000_000):
    """Callable t -> T_lam^* g(t) (exact midpoint-rule sum over the grid)."""
    U, V, W = g.grid.mesh()
    gw = g.values.ravel() * W
    nz = gw != 0
    U, V, gw = U[nz], V[nz], gw[nz]

    def fstar(t):
        t = np.asarray(t, dtype=float)
        flat = t.ravel()
        out = np.zeros(flat.size, dtype=complex)
        step = max(1, chunk // max(1, U.size))
        for s in range(0, flat.size, step):
            tt = flat[s:s + step, None]
            theta = -lam * eval_phase(params, U[None, :], V[None, :], tt)
            kern = (np.cos(theta) + 1j * np.sin(theta)) * cutoff.psi(U[None, :], V[None, :], tt)
            out[s:s + step] = kern @ gw
        return out.reshape(t.shape)

    return fstar


def apply_T_star(params: PhaseParams, lam: float, g: SampledField, t_nodes,
                 spec: QuadratureSpec | None = None, cutoff: CutoffSpec = DEFAULT_CUTOFF) -> SampledLine:
    """T_lam^* g at the given t nodes by a midpoint Riemann sum over (u, v).

    ``spec`` is accepted for signature symmetry; no t-quadrature is involved.
    A ResolutionWarning is issued (and recorded on the line) when the grid
    under-resolves the (u, v) oscillation.
    """
    if not np.all(np.isfinite(g.values)):
        raise ValueError("non-finite input field")
    t = np.asarray(t_nodes.t if isinstance(t_nodes, SampledLine) else t_nodes, dtype=float)
    msgs = _check_resolution(params, lam, g.grid, float(np.max(np.abs(t))) if t.size else 0.0)
    for msg in msgs:
        warnings.warn(msg, ResolutionWarning, stacklevel=2)
    vals = adjoint_function(params, lam, g, cutoff)(t)
    weights = t_nodes.weights if isinstance(t_nodes, SampledLine) else None
    return SampledLine(t, vals, weights, resolved=not msgs, notes=msgs)


def adjoint_norm_sq(params: PhaseParams, lam: float, g: SampledField,
                    spec: QuadratureSpec = DEFAULT_SPEC, cutoff: CutoffSpec = DEFAULT_CUTOFF) -> float:
    """||T_lam^* g||^2_{L^2(R)} with the t-integral done adaptively."""
    fstar = adjoint_function(params, lam, g, cutoff)
    X, Y, _ = g.grid.mesh()
    tmax = float(np.max(cutoff.t_extent(X, Y)))
    if tmax == 0:
        return 0.0
    # |T^* g|^2 oscillates at most at rate lam * sup|d_t S|
    rate = lam * (params.k * np.max(np.abs(X)) ** params.m + params.l * np.max(np.abs(Y)) ** params.n)
    n0 = int(min(2 ** 14, max(1, math.ceil(2 * tmax * rate / spec.osc_capacity))))
    res = integrate_oscillatory(None, lambda t: np.abs(fstar(t)) ** 2, (-tmax, tmax), 0.0, spec,
                                initial_panels=n0)
    return float(res.value.real)


# --- the TT* kernel ----------------------------------------------------------

def kernel_K_batch(params: PhaseParams, lam: float, u, v, x, y,
                   spec: QuadratureSpec = DEFAULT_SPEC, cutoff: CutoffSpec = DEFAULT_CUTOFF):
    """Vectorized kernel_K over arrays of tuples; returns a BatchResult."""
    u, v, x, y = (np.atleast_1d(np.asarray(a, dtype=float)) for a in (u, v, x, y))
    u, v, x, y = np.broadcast_arrays(u, v, x, y)
    u, v, x, y = (a.ravel() for a in (u, v, x, y))
    dx = ipow(x, params.m) - ipow(u, params.m)
    dy = ipow(y, params.n) - ipow(v, params.n)
    tau = np.minimum(cutoff.t_extent(u, v), cutoff.t_extent(x, y))

    def amp(idx, t):
        return cutoff.psi(u[idx], v[idx], t) * cutoff.psi(x[idx], y[idx], t)

    def phase(idx, t):
        return dx[idx] * ipow(t, params.k) + dy[idx] * ipow(t, params.l)

    res = integrate_batch(amp, -tau, tau, lam, phase, spec)
    dead = tau <= 0
    res.values[dead] = 0.0
    res.errors[dead] = 0.0
    return res


def kernel_K(params: PhaseParams, lam: float, u, v, x, y,
             spec: QuadratureSpec = DEFAULT_SPEC, cutoff: CutoffSpec = DEFAULT_CUTOFF) -> complex:
    return complex(kernel_K_batch(params, lam, u, v, x, y, spec, cutoff).values[0])


class KernelCache:
    """Kernel matrices keyed by (params, lam, grid, spec, cutoff).

    Reads are lock-free dictionary lookups; inserts take the lock.
    """

    def __init__(self):
        self._store = {}
        self._lock = threading.Lock()

    def get(self, key):
        return self._store.get(key)

    def put(self, key, value):
        with self._lock:
            return self._store.setdefault(key, value)

    def clear(self):
        with self._lock:
            self._store.clear()

    def __len__(self):
        return len(self._store)


DEFAULT_CACHE = KernelCache()


def kernel_matrix(params: PhaseParams, lam: float, grid, spec: QuadratureSpec = DEFAULT_SPEC,
                  cutoff: CutoffSpec = DEFAULT_CUTOFF, cache: KernelCache | None = DEFAULT_CACHE):
    """Matrix K[a, b] = kernel_K(node_b, node_a); Hermitian, so half is computed."""
    g = _as_tensor(grid)
    key = (params.as_tuple(), float(lam), g.key(), spec, cutoff)
    if cache is not None:
        hit = cache.get(key)
        if hit is not None:
            return hit
    X, Y, _ = g.mesh()
    J = X.size
    ia, ib = np.triu_indices(J)
    res = kernel_K_batch(params, lam, X[ib], Y[ib], X[ia], Y[ia], spec, cutoff)
    K = np.zeros((J, J), dtype=complex)
    K[ia, ib] = res.values
    K[ib, ia] = np.conj(res.values)
    K[np.arange(J), np.arange(J)] = K[np.arange(J), np.arange(J)].real
    if cache is not None:
        K = cache.put(key, K)
    return K


def apply_TK(params: PhaseParams, lam: float, g: SampledField, spec: QuadratureSpec = DEFAULT_SPEC,
             cutoff: CutoffSpec = DEFAULT_CUTOFF, cache: KernelCache | None = DEFAULT_CACHE) -> SampledField:
    """T_K g(x, y) = sum_{(u,v)} K(u, v, x, y) g(u, v) du dv."""
    msgs = _check_resolution(params, lam, g.grid, cutoff.outer)
    for msg in msgs:
        warnings.warn(msg, ResolutionWarning, stacklevel=2)
    K = kernel_matrix(params, lam, g.grid, spec, cutoff, cache)
    _, _, W = g.grid.mesh()
    out = K @ (g.values.ravel() * W)
    return SampledField(g.grid, out.reshape(g.grid.shape))


# --- CSV ---------------------------------------------------------------------

def write_field_csv(fld: SampledField, path) -> None:
    """Columns: i, j, x, y, re, im."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "x", "y", "re", "im"])
        for i, xv in enumerate(fld.grid.x):
            for j, yv in enumerate(fld.grid.y):
                z = fld.values[i, j]
                w.writerow([i, j, repr(float(xv)), repr(float(yv)), repr(float(z.real)), repr(float(z.imag))])


def _widths_from_nodes(c):
    # midpoint cells: interior edges halfway between nodes, outer cells mirrored
    edges = np.empty(c.size + 1)
    edges[1:-1] = 0.5 * (c[1:] + c[:-1])
    edges[0] = c[0] - (edges[1] - c[0])
    edges[-1] = c[-1] + (c[-1] - edges[-2])
    return np.diff(edges)


def read_field_csv(path) -> SampledField:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    ni = max(int(r["i"]) for r in rows) + 1
    nj = max(int(r["j"]) for r in rows) + 1
    x = np.zeros(ni)
    y = np.zeros(nj)
    vals = np.zeros((ni, nj), dtype=complex)
    for r in rows:
        i, j = int(r["i"]), int(r["j"])
        x[i] = float(r["x"])
        y[j] = float(r["y"])
        vals[i, j] = complex(float(r["re"]), float(r["im"]))
    return SampledField(TensorGrid(x, y, _widths_from_nodes(x), _widths_from_nodes(y)), vals)
