"""Grid L^p norms and lower estimates of ||T_lam||_{L^2 -> L^p}.

Two estimators, both lower bounds:

* ``witness_ratio``: ||T_lam chi_[0,1]||_p / ||chi_[0,1]||_2 on a dyadically
  graded grid that resolves the box |x| <~ lam^{-1/m}, |y| <~ lam^{-1/n};
* ``ascent_norm``: normalized ascent f <- T^*(|Tf|^{p-2} Tf) on a fully
  discretized operator (exact weighted adjoint pair).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .operator import SampledField, TensorGrid, apply_T
from .phase import DEFAULT_CUTOFF, CutoffSpec, PhaseParams, eval_phase
from .quad import QuadratureSpec

WITNESS_SPEC = QuadratureSpec(eps_abs=1e-9, eps_rel=1e-6)


class ResolutionError(ValueError):
    pass


class MonotonicityError(AssertionError):
    """The ascent objective decreased by more than the allowed slack."""


@dataclass
class NormEstimate:
    value: float
    kind: str
    iterations: int = 0
    residual: float = 0.0
    converged: bool = True
    history: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (math.isfinite(self.value) and self.value >= 0):
            raise ValueError(f"norm estimate must be finite and >= 0, got {self.value}")
        if self.kind not in ("lower_witness", "ascent_stationary"):
            raise ValueError(f"unknown estimate kind {self.kind!r}")


def lp_norm(fld: SampledField, p) -> float:
    """(sum |value|^p dx dy)^{1/p}; p = inf gives the max modulus."""
    a = np.abs(fld.values)
    if p == math.inf or p == "inf":
        return float(a.max()) if a.size else 0.0
    if p < 1:
        raise ValueError("p must be >= 1")
    W = np.outer(fld.grid.wx, fld.grid.wy)
    amax = a.max() if a.size else 0.0
    if amax == 0:
        return 0.0
    # scale out the maximum to keep |v|^p in range
    return float(amax * np.sum((a / amax) ** p * W) ** (1.0 / p))


def dyadic_axis(scale: float, extent: float, core: int = 4, cells: int = 4, shell_cells: int = 8):
    """Midpoint nodes and widths on [-extent, extent], graded around 0.

    A uniform core [-core*scale, core*scale] with ``cells`` cells per unit of
    ``scale``; beyond it dyadic shells [2^j a, 2^{j+1} a] with ``shell_cells``
    cells each, the last shell clipped at ``extent``.
    """
    a = core * scale
    if a >= extent:
        n = max(2 * core * cells, int(math.ceil(2 * extent * cells / scale)))
        edges = np.linspace(-extent, extent, n + 1)
    else:
        pos = [np.linspace(0.0, a, core * cells + 1)]
        while a < extent:
            b = min(2 * a, extent)
            pos.append(np.linspace(a, b, shell_cells + 1)[1:])
            a = b
        pos = np.concatenate(pos)
        edges = np.concatenate([-pos[::-1], pos[1:]])
    return 0.5 * (edges[1:] + edges[:-1]), np.diff(edges)


def witness_grid(params: PhaseParams, lam: float, core: int = 4, cells: int = 4, shell_cells: int = 8,
                 extent: float = 1.0) -> TensorGrid:
    """Graded grid concentrating on |x| <~ lam^{-1/m}, |y| <~ lam^{-1/n}."""
    sx = extent if lam <= 0 else min(extent, lam ** (-1.0 / params.m))
    sy = extent if lam <= 0 else min(extent, lam ** (-1.0 / params.n))
    x, wx = dyadic_axis(sx, extent, core, cells, shell_cells)
    y, wy = dyadic_axis(sy, extent, core, cells, shell_cells)
    return TensorGrid(x, y, wx, wy)


def _cells_in_box(nodes, half):
    return int(np.count_nonzero(np.abs(nodes) <= half))


def chi01(t):
    return np.ones_like(np.asarray(t, dtype=float))


def witness_ratio(params: PhaseParams, lam: float, p: float, grid: TensorGrid | None = None,
                  spec: QuadratureSpec = WITNESS_SPEC, cutoff: CutoffSpec = DEFAULT_CUTOFF,
                  refine: int = 1) -> NormEstimate:
    """||T_lam chi_[0,1]||_{L^p} / ||chi_[0,1]||_{L^2}  (the denominator is 1).

    ``refine`` multiplies the cell counts of the default graded grid.
    """
    if grid is None:
        grid = witness_grid(params, lam, cells=4 * refine, shell_cells=8 * refine)
    if lam > 0:
        bx = lam ** (-1.0 / params.m)
        by = lam ** (-1.0 / params.n)
        cx, cy = _cells_in_box(grid.x, bx), _cells_in_box(grid.y, by)
        if (bx < np.max(np.abs(grid.x)) and cx < 8) or (by < np.max(np.abs(grid.y)) and cy < 8):
            raise ResolutionError(f"witness box under-resolved at lambda={lam:g}: {cx} x {cy} cells")
    fld = apply_T(params, lam, chi01, grid, spec, cutoff, t_range=(0.0, 1.0))
    val = lp_norm(fld, p)
    n_bad = int(fld.flags.sum()) if fld.flags is not None else 0
    return NormEstimate(val, "lower_witness", converged=n_bad == 0,
                        info={"nodes": grid.size, "unconverged_nodes": n_bad})


# --- discretized operator and ascent -----------------------------------------

def t_layout(lam: float, params: PhaseParams, grid: TensorGrid, lo: float = -1.0, hi: float = 1.0,
             order: int = 16, per_pi: float = 1.0):
    """Composite Gauss-Legendre nodes/weights on [lo, hi] resolving e^{i lam S}."""
    xg, wg = np.polynomial.legendre.leggauss(order)
    X, Y = np.max(np.abs(grid.x)), np.max(np.abs(grid.y))
    tm = max(abs(lo), abs(hi))
    rate = lam * (params.k * X ** params.m * tm ** (params.k - 1) + params.l * Y ** params.n * tm ** (params.l - 1))
    n_pan = 2 + int(math.ceil((hi - lo) * rate / (math.pi * per_pi)))
    n_pan += n_pan % 2  # keeps the midpoint of [lo, hi] on a panel edge
    edges = np.linspace(lo, hi, n_pan + 1)
    h = 0.5 * np.diff(edges)
    c = 0.5 * (edges[1:] + edges[:-1])
    return (c[:, None] + h[:, None] * xg).ravel(), (h[:, None] * wg).ravel()


class DiscretizedT:
    """T_lam as the map from samples f(t_q) to the field sum_q e^{i lam S} psi f(t_q) w_q.

    ``rmatvec`` is the exact adjoint for the inner products weighted by the
    t-weights w_q and the cell measures of the grid.
    """

    def __init__(self, params: PhaseParams, lam: float, grid: TensorGrid, t, w,
                 cutoff: CutoffSpec = DEFAULT_CUTOFF, chunk: int = 4_000_000):
        self.params, self.lam, self.grid = params, float(lam), grid
        self.t = np.asarray(t, dtype=float)
        self.w = np.asarray(w, dtype=float)
        self.cutoff = cutoff
        X, Y, W = grid.mesh()
        self.X, self.Y, self.W = X, Y, W
        self._rows = max(1, chunk // max(1, self.t.size))
        self._dense = None
        if X.size * self.t.size <= chunk:
            self._dense = self._block(slice(0, X.size))

    @property
    def shape(self):
        return (self.X.size, self.t.size)

    def _block(self, sl):
        theta = self.lam * eval_phase(self.params, self.X[sl, None], self.Y[sl, None], self.t[None, :])
        psi = self.cutoff.psi(self.X[sl, None], self.Y[sl, None], self.t[None, :])
        return (np.cos(theta) + 1j * np.sin(theta)) * psi

    def _blocks(self):
        if self._dense is not None:
            yield slice(0, self.X.size), self._dense
            return
        for s in range(0, self.X.size, self._rows):
            sl = slice(s, min(self.X.size, s + self._rows))
            yield sl, self._block(sl)

    def matvec(self, f):
        fw = np.asarray(f, dtype=complex) * self.w
        out = np.empty(self.X.size, dtype=complex)
        for sl, B in self._blocks():
            out[sl] = B @ fw
        return out

    def rmatvec(self, g):
        gw = np.asarray(g, dtype=complex) * self.W
        out = np.zeros(self.t.size, dtype=complex)
        for sl, B in self._blocks():
            out += B[:, :].conj().T @ gw[sl]
        return out

    def dense(self):
        """Matrix of sqrt(W) T sqrt(w): its top singular value is ||T||_{L^2 -> L^2}."""
        M = np.vstack([B for _, B in self._blocks()])
        return np.sqrt(self.W)[:, None] * M * np.sqrt(self.w)[None, :]

    def norm_line(self, f):
        return float(np.sqrt(np.sum(np.abs(f) ** 2 * self.w)))

    def norm_field(self, g, p):
        a = np.abs(g)
        amax = a.max()
        if amax == 0:
            return 0.0
        return float(amax * np.sum((a / amax) ** p * self.W) ** (1.0 / p))


def ascent_norm(params: PhaseParams, lam: float, p: int, grid: TensorGrid, layout=None, max_iter: int = 200,
                tol: float = 1e-10, seed: int = 0, f0=None, cutoff: CutoffSpec = DEFAULT_CUTOFF,
                slack: float = 1e-12, operator: DiscretizedT | None = None) -> NormEstimate:
    """Stationary value of ||T f||_p over ||f||_2 = 1 by normalized ascent.

    ``f0``: None (random start from ``seed``), "chi" (chi_[0,1] on the nodes),
    a callable of t, or an array of node values.  The objective history is
    checked to be nondecreasing up to ``slack``; a violation raises
    MonotonicityError.
    """
    if p < 2 or int(p) != p or int(p) % 2:
        raise ValueError("ascent needs an even integer p >= 2")
    p = int(p)
    if operator is None:
        if layout is None:
            layout = t_layout(lam, params, grid)
        operator = DiscretizedT(params, lam, grid, layout[0], layout[1], cutoff)
    T = operator
    rng = np.random.default_rng(seed)

    def start(attempt):
        if f0 is None or attempt > 0:
            return rng.standard_normal(T.t.size) + 1j * rng.standard_normal(T.t.size)
        if isinstance(f0, str):
            if f0 != "chi":
                raise ValueError(f"unknown start {f0!r}")
            return ((T.t >= 0) & (T.t <= 1)).astype(complex)
        if callable(f0):
            return np.asarray(f0(T.t), dtype=complex)
        return np.asarray(f0, dtype=complex)

    for attempt in range(4):
        f = start(attempt)
        nf = T.norm_line(f)
        if nf == 0:
            continue
        f = f / nf
        Tf = T.matvec(f)
        if np.all(Tf == 0):
            continue
        break
    else:
        raise RuntimeError("T f vanished for every start (3 restarts)")

    obj = T.norm_field(Tf, p)
    history = [obj]
    converged = False
    residual = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        a = np.abs(Tf)
        # scale-free ascent direction; normalization removes the scale
        amax = a.max()
        direction = T.rmatvec((a / amax) ** (p - 2) * Tf)
        nd = T.norm_line(direction)
        if nd == 0:
            break
        f = direction / nd
        Tf = T.matvec(f)
        new = T.norm_field(Tf, p)
        if new < obj - slack:
            raise MonotonicityError(f"ascent objective decreased: {obj!r} -> {new!r} at iteration {it}")
        history.append(new)
        residual = (new - obj) / new if new > 0 else 0.0
        obj = new
        if residual < tol:
            converged = True
            break
    return NormEstimate(obj, "ascent_stationary", iterations=it, residual=residual,
                        converged=converged, history=history, info={"t_nodes": int(T.t.size),
                                                                    "grid_nodes": int(T.X.size)})
