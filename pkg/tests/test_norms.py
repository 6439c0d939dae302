import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oscdecay import PhaseParams
from oscdecay.norms import (WITNESS_SPEC, DiscretizedT, MonotonicityError, NormEstimate, ResolutionError,
                            ascent_norm, dyadic_axis, lp_norm, t_layout, witness_grid, witness_ratio)
from oscdecay.operator import GridSpec, SampledField, TensorGrid, apply_T

P = PhaseParams(1, 2, 2, 1)


def unit_square(n):
    return GridSpec(x_lo=0, x_hi=1, y_lo=0, y_hi=1, nx=n, ny=n).tensor()


def toy_operator(lam=10.0, nt=6):
    grid = GridSpec(nx=6, ny=6).tensor()
    t, w = np.polynomial.legendre.leggauss(nt)
    return DiscretizedT(P, lam, grid, t, w)


# --- lp_norm -------------------------------------------------------------------

def test_lp_norm_zero_and_constant():
    g = unit_square(7)
    assert lp_norm(SampledField(g, np.zeros(g.shape)), 3) == 0.0
    one = SampledField(g, np.ones(g.shape))
    for p in (1, 2, 6, 7.5, math.inf):
        assert lp_norm(one, p) == pytest.approx(1.0, abs=1e-14)


def test_lp_norm_p2_direct_sum():
    rng = np.random.default_rng(0)
    g = GridSpec(nx=13, ny=9).tensor()
    v = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
    ref = math.sqrt(sum(abs(v[i, j]) ** 2 * g.wx[i] * g.wy[j] for i in range(13) for j in range(9)))
    assert abs(lp_norm(SampledField(g, v), 2) - ref) <= 1e-13 * ref


@given(st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False),
       st.sampled_from([1, 2, 3, 6, 10, math.inf]), st.integers(0, 1000))
def test_lp_norm_homogeneous(c, p, seed):
    rng = np.random.default_rng(seed)
    g = GridSpec(nx=5, ny=4).tensor()
    f = SampledField(g, rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape))
    assert abs(lp_norm(f * c, p) - abs(c) * lp_norm(f, p)) <= 1e-13 * max(1.0, abs(c) * lp_norm(f, p))


def test_lp_norm_rejects_small_p():
    g = unit_square(2)
    with pytest.raises(ValueError):
        lp_norm(SampledField(g, np.ones(g.shape)), 0.5)


# --- grids ---------------------------------------------------------------------

def test_dyadic_axis_covers_extent():
    x, w = dyadic_axis(0.01, 1.0)
    assert np.sum(w) == pytest.approx(2.0)
    assert np.all(w > 0) and np.all(np.diff(x) > 0)
    assert np.count_nonzero(np.abs(x) <= 0.01) == 8
    x2, w2 = dyadic_axis(0.5, 1.0)
    assert np.sum(w2) == pytest.approx(2.0)


# --- witness -------------------------------------------------------------------

def test_witness_lambda_zero():
    est = witness_ratio(P, 0.0, 6)
    assert est.kind == "lower_witness" and est.value > 0 and est.converged
    grid = witness_grid(P, 0.0)
    fld = apply_T(P, 0.0, lambda t: np.ones_like(t), grid, WITNESS_SPEC, t_range=(0, 1))
    assert est.value == pytest.approx(lp_norm(fld, 6), rel=1e-12)


def test_witness_band_over_lambda():
    scaled = [witness_ratio(P, 2.0 ** j, 6).value * 2.0 ** (0.25 * j) for j in range(6, 13)]
    assert max(scaled) / min(scaled) <= 2.0


def test_witness_grid_refinement():
    a = witness_ratio(P, 256.0, 6).value
    b = witness_ratio(P, 256.0, 6, refine=2).value
    assert abs(a - b) / b < 0.01


def test_witness_resolution_error():
    coarse = GridSpec(nx=16, ny=16).tensor()
    with pytest.raises(ResolutionError):
        witness_ratio(P, 4096.0, 6, grid=coarse)


def test_witness_sign_flip_invariance():
    # |T_{-lam} f| = |T_lam f| for real f and real psi
    grid = witness_grid(P, 64.0)
    t, w = t_layout(64.0, P, grid, 0.0, 1.0)
    f = np.ones_like(t)
    plus = DiscretizedT(P, 64.0, grid, t, w)
    minus = DiscretizedT(P, -64.0, grid, t, w)
    for p in (2, 6):
        a = plus.norm_field(plus.matvec(f), p)
        b = minus.norm_field(minus.matvec(f), p)
        assert abs(a - b) <= 1e-13 * a


# --- discretized operator --------------------------------------------------------

def test_discretized_adjoint_pair():
    T = toy_operator(25.0, 9)
    rng = np.random.default_rng(2)
    f = rng.standard_normal(T.t.size) + 1j * rng.standard_normal(T.t.size)
    g = rng.standard_normal(T.X.size) + 1j * rng.standard_normal(T.X.size)
    lhs = np.sum(T.matvec(f) * np.conj(g) * T.W)
    rhs = np.sum(f * np.conj(T.rmatvec(g)) * T.w)
    assert abs(lhs - rhs) <= 1e-12 * abs(lhs)


def test_discretized_chunking_matches_dense():
    grid = GridSpec(nx=6, ny=5).tensor()
    t, w = np.polynomial.legendre.leggauss(11)
    a = DiscretizedT(P, 40.0, grid, t, w)
    b = DiscretizedT(P, 40.0, grid, t, w, chunk=50)
    f = np.cos(t) + 1j * t
    assert np.max(np.abs(a.matvec(f) - b.matvec(f))) < 1e-13
    assert np.max(np.abs(a.rmatvec(a.matvec(f)) - b.rmatvec(b.matvec(f)))) < 1e-13


# --- ascent --------------------------------------------------------------------

@pytest.mark.parametrize("nt", [6, 36])
def test_ascent_p2_matches_svd(nt):
    T = toy_operator(10.0, nt)
    sigma = np.linalg.svd(T.dense(), compute_uv=False)[0]
    est = ascent_norm(P, 10.0, 2, T.grid, operator=T, max_iter=5000, tol=1e-15)
    assert abs(est.value - sigma) <= 1e-6 * sigma
    assert all(b >= a - 1e-12 for a, b in zip(est.history, est.history[1:]))


def test_ascent_chi_start_equals_witness():
    lam = 16.0
    grid = witness_grid(P, lam)
    w = witness_ratio(P, lam, 6, grid=grid)
    est = ascent_norm(P, lam, 6, grid, max_iter=1, f0="chi")
    assert abs(est.history[0] - w.value) <= 1e-7 * w.value
    assert est.value >= w.value * (1 - 1e-7)


@pytest.mark.parametrize("p,seed", [(4, 0), (6, 1), (8, 2)])
def test_ascent_monotone(p, seed):
    grid = witness_grid(P, 32.0, cells=2, shell_cells=4)
    est = ascent_norm(P, 32.0, p, grid, max_iter=40, tol=1e-12, seed=seed)
    h = est.history
    assert all(b >= a - 1e-12 for a, b in zip(h, h[1:]))
    assert est.kind == "ascent_stationary"
    if est.converged:
        assert est.residual <= 1e-12


def test_ascent_detects_decrease():
    T = toy_operator()
    _, _, Vh = np.linalg.svd(T.dense())
    top = Vh[0].conj() / np.sqrt(T.w)  # top right singular vector in node values

    class BrokenAdjoint:
        def __init__(self, inner):
            self.inner, self.t, self.X = inner, inner.t, inner.X
            self.matvec, self.norm_line, self.norm_field = inner.matvec, inner.norm_line, inner.norm_field

        def rmatvec(self, g):
            return np.random.default_rng(0).standard_normal(self.t.size) + 0j

    with pytest.raises(MonotonicityError):
        ascent_norm(P, 10.0, 2, T.grid, operator=BrokenAdjoint(T), f0=top)


def test_ascent_restarts_from_zero_start():
    T = toy_operator()
    est = ascent_norm(P, 10.0, 2, T.grid, operator=T, f0=np.zeros(T.t.size), max_iter=500, tol=1e-14)
    assert est.value > 0


def test_ascent_rejects_odd_p():
    T = toy_operator()
    with pytest.raises(ValueError):
        ascent_norm(P, 10.0, 3, T.grid, operator=T)


def test_norm_estimate_validation():
    with pytest.raises(ValueError):
        NormEstimate(-1.0, "lower_witness")
    with pytest.raises(ValueError):
        NormEstimate(float("nan"), "lower_witness")
    with pytest.raises(ValueError):
        NormEstimate(1.0, "upper_bound")


def test_t_layout_even_panels():
    grid = TensorGrid(np.array([-0.5, 0.5]), np.array([-0.5, 0.5]), np.ones(2), np.ones(2))
    t, w = t_layout(100.0, P, grid)
    assert np.sum(w) == pytest.approx(2.0)
    assert np.sum(w[t > 0]) == pytest.approx(1.0, abs=1e-14)
