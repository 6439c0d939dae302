from fractions import Fraction
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oscdecay import CutoffSpec, PhaseParams, eval_cutoff, eval_phase, lower_bound_exponent, predicted_exponent
from oscdecay.phase import DEFAULT_CUTOFF, NormalizationError, ipow

exps = st.integers(min_value=1, max_value=7)


@st.composite
def valid_params(draw):
    m, n = draw(exps), draw(exps)
    l = draw(st.integers(1, 6))  # noqa: E741
    k = draw(st.integers(l + 1, 8))
    return PhaseParams(m, n, k, l)


def test_phase_examples():
    assert eval_phase(PhaseParams(1, 2, 2, 1), 1.0, 1.0, 1.0) == 2.0
    assert eval_phase(PhaseParams(2, 3, 3, 1), 0.5, 0.5, 0.5) == 0.25 * 0.125 + 0.125 * 0.5 == 0.09375


@given(valid_params(), st.floats(-2, 2), st.floats(-2, 2))
def test_phase_vanishes_at_t0(P, x, y):
    assert eval_phase(P, x, y, 0.0) == 0.0


@given(st.floats(-3, 3, allow_subnormal=False), st.integers(0, 12))
def test_ipow_matches_float_power(x, e):
    assert ipow(x, e) == pytest.approx(x ** e, rel=1e-14, abs=1e-300)


@given(valid_params(), st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
def test_phase_parity(P, x, y, t):
    a, b = eval_phase(P, x, y, t), eval_phase(P, x, y, -t)
    if P.k % 2 == 0 and P.l % 2 == 0:
        assert a == b
    elif P.k % 2 == 1 and P.l % 2 == 1:
        assert a == -b


def test_cutoff_examples():
    assert eval_cutoff(DEFAULT_CUTOFF, 0.1, 0.1, 0.1) == 1.0
    assert eval_cutoff(DEFAULT_CUTOFF, 1.0, 0.5, 0.5) == 0.0
    c = 0.75 / math.sqrt(3)
    v = eval_cutoff(DEFAULT_CUTOFF, c, c, c)
    assert 0.0 < v < 1.0
    assert eval_cutoff(DEFAULT_CUTOFF, 0.75, 0.0, 0.0) == pytest.approx(v, abs=1e-15)
    assert eval_cutoff(DEFAULT_CUTOFF, 0.0, -0.6, 0.45) == pytest.approx(v, abs=1e-15)


@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1), st.floats(0, 1))
def test_cutoff_plateau_and_support(a, b, c, r):
    nrm = math.sqrt(a * a + b * b + c * c)
    if nrm < 1e-6:
        return
    x, y, t = (r * 1.2 * v / nrm for v in (a, b, c))
    psi = eval_cutoff(DEFAULT_CUTOFF, x, y, t)
    rr = math.sqrt(x * x + y * y + t * t)
    assert 0.0 <= psi <= 1.0
    if rr <= 0.5:
        assert psi == 1.0
    if rr >= 1.0:
        assert psi == 0.0


def test_cutoff_monotone_in_transition():
    r = np.linspace(0.5, 1.0, 2001)
    v = DEFAULT_CUTOFF.radial(r)
    assert np.all(np.diff(v) <= 0)
    assert v[0] == 1.0 and v[-1] == 0.0


def test_cutoff_profile_is_smooth_at_the_ends():
    # all derivatives vanish at the ends of the transition: f(r) - 1 decays faster than any power
    for eps in (1e-2, 5e-3):
        assert 1.0 - DEFAULT_CUTOFF.radial(0.5 + eps) < eps ** 6
        assert DEFAULT_CUTOFF.radial(1.0 - eps) < eps ** 6


def test_zeta_plateau_and_support():
    s = np.linspace(-3, 3, 6001)
    z = DEFAULT_CUTOFF.zeta(s)
    assert np.all(z[np.abs(s) <= 1] == 1.0)
    assert np.all(z[np.abs(s) >= 2] == 0.0)
    assert np.all((z >= 0) & (z <= 1))


def test_frozen_cutoff_is_one():
    fz = CutoffSpec(frozen=True)
    assert np.all(fz.psi(np.array([0.9, -2.0]), np.array([0.9, 0.0]), np.array([0.9, 3.0])) == 1.0)


def test_cutoff_validation():
    with pytest.raises(ValueError):
        CutoffSpec(inner=1.0, outer=0.5)


def test_predicted_exponent_examples():
    assert predicted_exponent(PhaseParams(1, 2, 2, 1)) == (6, 0.25)
    p, d = predicted_exponent(PhaseParams(1, 1, 2, 1))
    assert p == 6 and d == pytest.approx(1 / 3, abs=1e-15)
    P = PhaseParams(2, 3, 3, 2)
    assert P.delta_exact == Fraction(5, 48)
    assert predicted_exponent(P) == (8, 5 / 48)


def test_lower_bound_examples():
    assert lower_bound_exponent(PhaseParams(1, 2, 2, 1), 6) == 0.25
    assert lower_bound_exponent(PhaseParams(1, 1, 2, 1), 6) == pytest.approx(1 / 3, abs=1e-15)
    P = PhaseParams(1, 1, 3, 2)
    assert lower_bound_exponent(P, 8) == 0.25
    assert P.delta_pred == 0.1875
    assert not P.sharp
    with pytest.raises(ValueError):
        lower_bound_exponent(P, 0.5)


def test_normalization():
    with pytest.raises(NormalizationError, match="k > l"):
        PhaseParams(1, 2, 1, 2)
    with pytest.raises(NormalizationError):
        PhaseParams(1, 2, 2, 2)
    P = PhaseParams.normalized(2, 1, 1, 2)
    assert P.as_tuple() == (1, 2, 2, 1)
    for bad in ((0, 1, 2, 1), (1, 1, 2, 0), (1.0, 1, 2, 1), (True, 1, 2, 1)):
        with pytest.raises(ValueError):
            PhaseParams(*bad)


@given(valid_params())
def test_sharpness_identity(P):
    assert P.p == 2 * P.k + 2
    if P.l <= P.n:
        assert P.sharp
        assert Fraction(1, P.p) * (Fraction(1, P.m) + Fraction(1, P.n)) == P.delta_exact
        assert predicted_exponent(P)[1] == lower_bound_exponent(P, P.p)


@given(valid_params(), st.integers(1, 7), st.integers(1, 6))
def test_prediction_depends_on_max_n_l(P, n2, l2):
    if l2 >= P.k or max(n2, l2) != max(P.n, P.l):
        return
    Q = PhaseParams(P.m, n2, P.k, l2)
    assert predicted_exponent(Q) == predicted_exponent(P)
