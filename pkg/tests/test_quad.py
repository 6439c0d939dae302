import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import oscillatory, simpson
from oscdecay import QuadratureSpec, fourier_halfline, integrate_oscillatory
from oscdecay.phase import DEFAULT_CUTOFF
from oscdecay.quad import QuadratureError, WG, WK, XK, integrate_batch

zsq = DEFAULT_CUTOFF.zeta_sq


def sq(t):
    return t * t


def one(t):
    return np.ones_like(t)


def test_kronrod_rule_constants():
    # K15 integrates polynomials up to degree 22, G7 up to 13
    for d in range(0, 23, 2):
        assert np.sum(WK * XK ** d) == pytest.approx(2.0 / (d + 1), abs=1e-15)
    xg = XK[1::2]
    for d in range(0, 14, 2):
        assert np.sum(WG * xg ** d) == pytest.approx(2.0 / (d + 1), abs=1e-15)


def test_zero_amplitude():
    r = integrate_oscillatory(sq, lambda t: np.zeros_like(t), (0, 1), 1234.5)
    assert r.value == 0 and r.converged


def test_no_oscillation_unit():
    r = integrate_oscillatory(sq, one, (0, 1), 0.0)
    assert r.value == pytest.approx(1.0, abs=1e-15)


def test_t_squared_lambda_50_against_simpson():
    ref = simpson(oscillatory(sq, one, 50.0), 0.0, 1.0)
    r = integrate_oscillatory(sq, one, (0, 1), 50.0)
    assert abs(r.value - ref) <= 1e-8
    assert r.converged


def test_reversed_interval_negates():
    f = integrate_oscillatory(sq, one, (0, 1), 7.0).value
    assert integrate_oscillatory(sq, one, (1, 0), 7.0).value == -f


@settings(max_examples=10)
@given(st.floats(0.0, 300.0), st.lists(st.floats(-1, 1), min_size=5, max_size=5),
       st.lists(st.floats(-1, 1), min_size=3, max_size=3))
def test_conjugation_symmetry(lam, pc, ac):
    phase = lambda t: np.polynomial.polynomial.polyval(t, pc)  # noqa: E731
    amp = lambda t: np.polynomial.polynomial.polyval(t, ac)  # noqa: E731
    plus = integrate_oscillatory(phase, amp, (-1, 1), lam).value
    minus = integrate_oscillatory(phase, amp, (-1, 1), -lam).value
    assert abs(minus - np.conj(plus)) <= 1e-13 * max(1.0, abs(plus))


@settings(max_examples=10)
@given(st.floats(0.0, 150.0), st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False),
       st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False), st.integers(0, 2 ** 31))
def test_linearity(lam, ca, cb, seed):
    rng = np.random.default_rng(seed)
    pc = rng.uniform(-1, 1, 4)
    fa, fb = rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 2)
    phase = lambda t: np.polynomial.polynomial.polyval(t, pc)  # noqa: E731
    f = lambda t: np.cos(fa[0] * t) + fa[1] * t ** 2 + fa[2]  # noqa: E731
    g = lambda t: np.exp(fb[0] * t) * (1 + fb[1] * t)  # noqa: E731
    spec = QuadratureSpec()
    If = integrate_oscillatory(phase, f, (-1, 1), lam, spec).value
    Ig = integrate_oscillatory(phase, g, (-1, 1), lam, spec).value
    Ih = integrate_oscillatory(phase, lambda t: ca * f(t) + cb * g(t), (-1, 1), lam, spec).value
    tol = 2 * (abs(ca) + abs(cb) + 1) * max(spec.eps_abs, spec.eps_rel * max(abs(If), abs(Ig), abs(Ih)))
    assert abs(Ih - (ca * If + cb * Ig)) <= tol


def random_problem(rng):
    deg = int(rng.integers(1, 5))
    pc = rng.uniform(-1, 1, deg + 1)
    ac = rng.uniform(-1, 1, 3) + 1j * rng.uniform(-1, 1, 3)
    lam = float(rng.uniform(0, 200))
    a = float(rng.uniform(-1, 0))
    b = float(rng.uniform(0.2, 1))
    phase = lambda t: np.polynomial.polynomial.polyval(t, pc)  # noqa: E731
    amp = lambda t: np.polynomial.polynomial.polyval(t, ac) * np.cos(t)  # noqa: E731
    return phase, amp, lam, a, b


def test_random_polynomial_phases_against_simpson():
    rng = np.random.default_rng(2024)
    for _ in range(5):
        phase, amp, lam, a, b = random_problem(rng)
        ref = simpson(oscillatory(phase, amp, lam), a, b)
        got = integrate_oscillatory(phase, amp, (a, b), lam).value
        assert abs(got - ref) <= max(1e-8, 1e-6 * abs(ref))


def test_cost_grows_at_most_linearly():
    counts = []
    lams = [100.0 * 2 ** j for j in range(6)]
    for lam in lams:
        counts.append(integrate_oscillatory(sq, one, (0, 1), lam).n_evals)
    for c1, c2 in zip(counts, counts[1:]):
        assert c2 <= 4 * c1 + 1000


def test_non_finite_integrand_raises():
    with pytest.raises(QuadratureError):
        integrate_oscillatory(None, lambda t: np.where(t > 0.3, np.nan, 1.0), (0, 1))


def test_depth_exhaustion_returns_flagged_estimate():
    spec = QuadratureSpec(eps_abs=1e-14, eps_rel=1e-14, max_depth=2)
    r = integrate_oscillatory(None, lambda t: np.abs(t - 1 / 3) ** 0.3, (0, 1), 0.0, spec)
    assert not r.converged
    exact = ((2 / 3) ** 1.3 + (1 / 3) ** 1.3) / 1.3
    assert abs(r.value - exact) < 1e-3


def test_spec_validation():
    for kw in ({"eps_abs": 0}, {"eps_rel": -1}, {"max_depth": 0}, {"order": 2}, {"order": 21}):
        with pytest.raises(ValueError):
            QuadratureSpec(**kw)


def test_batch_matches_scalar_calls():
    lam = np.array([0.0, 10.0, 55.5])
    a, b = np.array([0.0, -0.5, -1.0]), np.array([1.0, 0.7, 0.2])
    res = integrate_batch(lambda idx, t: np.cos(idx + t), a, b, lam, lambda idx, t: t ** 3 + idx * t)
    for j in range(3):
        single = integrate_oscillatory(lambda t: t ** 3 + j * t, lambda t: np.cos(j + t), (a[j], b[j]), lam[j])
        assert abs(res[j].value - single.value) <= 1e-12


# --- half-line Fourier integral --------------------------------------------

def test_halfline_alpha_one_at_zero_matches_plain_quadrature():
    r = fourier_halfline(1.0, zsq, 0.0)
    ref = integrate_oscillatory(None, zsq, (0, 2), 0.0).value
    assert abs(r.value - ref) <= 1e-12
    assert r.value.imag == 0 and r.value.real > 1.0


def test_halfline_alpha_half_at_zero_against_substituted_simpson():
    # s = u^2 removes the singularity: int_0^2 s^{-1/2} z(s) ds = int_0^sqrt2 2 z(u^2) du
    ref = simpson(lambda u: 2.0 * zsq(u * u), 0.0, math.sqrt(2.0))
    r = fourier_halfline(0.5, zsq, 0.0)
    assert abs(r.value - ref) <= 1e-10
    assert r.converged


def test_halfline_alpha_one_decays_like_one_over_t():
    ts = 2.0 ** np.arange(0, 11)
    mods = np.abs(fourier_halfline(1.0, zsq, ts).values) * (1 + ts)
    C = mods.max()
    assert abs(fourier_halfline(1.0, zsq, 100.0).value) <= C / 101.0


def test_halfline_against_direct_oscillatory_integral():
    # alpha = 2: no singularity, compare with the generic engine
    t = 13.7
    r = fourier_halfline(2.0, zsq, t)
    ref = integrate_oscillatory(lambda s: s, lambda s: s * zsq(s), (0, 2), 2 * math.pi * t).value
    assert abs(r.value - ref) <= 1e-11


def test_halfline_rejects_nonpositive_real_part():
    with pytest.raises(ValueError):
        fourier_halfline(0.0, zsq, 1.0)
    with pytest.raises(ValueError):
        fourier_halfline(-0.25 + 1j, zsq, 1.0)
