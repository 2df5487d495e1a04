import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

import oracles
from restriction_lab.convolution import BallGrid
from restriction_lab.errors import (
    AdmissibilityError,
    DegenerateInputError,
    ParameterError,
    SearchDivergence,
    SignError,
)
from restriction_lab.extremal import (
    HALF_PI,
    SymmetrizationOrbit,
    antipodal_symmetrize,
    el_residual,
    extremizer_search,
    gamma,
    gamma_max_search,
    gamma_secondary_max,
    gamma_values,
    phi_functional,
    random_even_start,
    second_variation,
)
from restriction_lab.multiscale import coarse_ball_grid
from restriction_lab.sphere import (
    Cap,
    GridSamples,
    Harmonic,
    Pointwise,
    cap_indicator,
    make_quadrature,
    random_harmonic,
    random_rotation,
)

ONE = Harmonic.constant(1.0)
Y2 = Harmonic.ylm(2, 0)
NORTH = np.array([0.0, 0.0, 1.0])


def _nonneg(rng, L):
    f = random_harmonic(rng, L)
    c = f.coeffs.copy()
    rule = make_quadrature(L + 20, 2 * L + 41)
    c[0] += (0.05 - f.samples(rule).min()) * math.sqrt(4 * math.pi)
    return Harmonic(c)


# ---------------------------------------------------------------- Φ

def test_phi_examples():
    assert_allclose(phi_functional(ONE), 2 * math.pi, rtol=1e-12)
    with pytest.raises(DegenerateInputError):
        phi_functional(Harmonic.zeros(2))


def test_phi_homogeneous(rng):
    f = random_harmonic(rng, 4)
    assert_allclose(phi_functional(f * 3.0), phi_functional(f), rtol=1e-12)


def test_phi_one_plus_y2_matches_dense_oracle():
    a = math.sqrt(5 / (16 * math.pi))

    def f(p):
        return 1.0 + a * (3 * p[:, 2] ** 2 - 1)

    norm_sq = 4 * math.pi + 1.0
    oracle = oracles.zonal_conv_norm_sq(f, f, 96, 96, 256) / norm_sq**2
    assert_allclose(phi_functional(ONE + Y2), oracle, rtol=1e-4)


def test_phi_rotation_invariant(rng):
    for _ in range(5):
        f = random_harmonic(rng, 3)
        R = random_rotation(rng)
        assert_allclose(phi_functional(f.rotated(R)), phi_functional(f), rtol=1e-6)


def test_phi_of_abs_dominates(rng):
    grid = BallGrid.make(32, 24, 49, 48)
    for _ in range(3):
        f = random_harmonic(rng, 2)
        absf = Pointwise(lambda p, f=f: np.abs(f.evaluate(p)))
        assert phi_functional(absf, grid) >= phi_functional(f, grid) - 1e-6


# ---------------------------------------------------------------- symmetrization

def test_symmetrize_even_function_unchanged(rng):
    f = random_harmonic(rng, 4).even_part()
    c = f.coeffs.copy()
    c[0] += 10.0
    f = Harmonic(c)
    fs = antipodal_symmetrize(f)
    pts = make_quadrature(10, 21).nodes
    assert_allclose(fs.evaluate(pts), f.evaluate(pts), rtol=1e-12)


def test_symmetrize_cap_indicator():
    cap = Cap(NORTH, 0.4)
    fs = antipodal_symmetrize(cap_indicator(cap))
    pts = make_quadrature(24, 49).nodes
    expected = (cap.contains(pts) | cap.antipode().contains(pts)) / math.sqrt(2)
    assert_allclose(fs.evaluate(pts), expected, atol=1e-15)


def test_symmetrize_grid_samples_preserves_norm(rng):
    rule = make_quadrature(16, 32)
    assert rule.antipodal_index is not None
    v = rng.uniform(0, 2, rule.size)
    f = GridSamples(rule, v)
    fs = antipodal_symmetrize(f)
    assert_allclose(fs.l2_norm_sq(), f.l2_norm_sq(), rtol=1e-10)
    assert_allclose(fs.values, fs.values[rule.antipodal_index], rtol=1e-15)
    with pytest.raises(SignError):
        antipodal_symmetrize(GridSamples(rule, v - 1.0))


@settings(max_examples=10)
@given(st.integers(0, 2**31), st.integers(1, 3))
def test_symmetrization_does_not_decrease_phi(seed, L):
    rng = np.random.default_rng(seed)
    f = _nonneg(rng, L)
    grid = coarse_ball_grid()
    assert phi_functional(antipodal_symmetrize(f), grid) >= phi_functional(f, grid) - 1e-6


# ---------------------------------------------------------------- Γ

def test_gamma_examples():
    q = 0.25 * math.pi
    assert_allclose(gamma(SymmetrizationOrbit(q, q, q, q)), 1.5, rtol=1e-15)
    assert gamma(SymmetrizationOrbit(0.0, 0.0, 0.0, 0.0)) == 1.0
    assert_allclose(gamma(SymmetrizationOrbit(HALF_PI, HALF_PI, HALF_PI, HALF_PI)), 1.0, atol=1e-15)
    with pytest.raises(ParameterError):
        SymmetrizationOrbit(-0.1, 0.0, 0.0, 0.0)


def test_gamma_max_search():
    best, arg = gamma_max_search(64)
    assert abs(best - 1.5) < 1e-6
    assert best <= 1.5 + 1e-9
    assert np.max(np.abs(arg - 0.25 * math.pi)) <= HALF_PI / 63
    step = HALF_PI / 63
    assert gamma_secondary_max(arg, 2 * step) < 1.5 - 1e-6


def test_gamma_boundary_and_refinement():
    face, _ = gamma_max_search(32, fixed_phi=0.0)
    assert face <= math.sqrt(2) + 1e-9
    coarse, _ = gamma_max_search(8, refine=False)
    fine, _ = gamma_max_search(64, refine=False)
    assert fine >= coarse
    with pytest.raises(ParameterError):
        gamma_max_search(4)


def test_gamma_random_scan(rng):
    x = rng.uniform(0, HALF_PI, (10**6, 4))
    assert np.max(gamma_values(*x.T)) <= 1.5 + 1e-12


# ---------------------------------------------------------------- second variation

def test_second_variation_examples():
    assert_allclose(second_variation(Y2) / Y2.l2_norm_sq(), -32 * math.pi**2 / 5, rtol=1e-4)
    assert_allclose(second_variation(Harmonic.ylm(4, 1)), -32 * math.pi**2 / 3, rtol=1e-4)
    with pytest.raises(AdmissibilityError):
        second_variation(Harmonic.ylm(1, 0))
    with pytest.raises(AdmissibilityError):
        second_variation(ONE + Y2)


def test_second_variation_negative_on_random_suite(rng):
    for _ in range(50):
        g = random_harmonic(rng, 6, even=True)
        c = g.coeffs.copy()
        c[0] = 0.0
        c /= np.linalg.norm(c)
        assert second_variation(Harmonic(c)) < 0


def test_second_variation_matches_finite_difference(rng):
    c = random_harmonic(rng, 4, even=True).coeffs.copy()
    c[0] = 0.0
    g = Harmonic(c / np.linalg.norm(c))
    h = 1e-2
    fd = (phi_functional(ONE + g * h) - 2 * phi_functional(ONE) + phi_functional(ONE - g * h)) / h**2
    fd *= (4 * math.pi) ** 2
    assert fd < 0
    assert_allclose(fd, 2 * second_variation(g), rtol=0.02)


# ---------------------------------------------------------------- EL residual

def test_el_residual_examples(rng):
    res, lam = el_residual(ONE)
    assert res < 1e-6
    assert_allclose(lam, 8 * math.pi**2, rtol=1e-12)
    res3, _ = el_residual(Harmonic.constant(3.0))
    assert_allclose(res3, res, atol=1e-15)
    assert el_residual(random_harmonic(rng, 3))[0] > 1e-3
    with pytest.raises(DegenerateInputError):
        el_residual(Harmonic.zeros(2))


def test_el_residual_direct_quadrature_for_samples():
    res, lam = el_residual(Pointwise(lambda p: np.ones(len(p))))
    assert res < 1e-6
    assert_allclose(lam, 8 * math.pi**2, rtol=1e-6)


# ---------------------------------------------------------------- search

def test_search_from_constant():
    tr = extremizer_search(ONE)
    assert 1 <= len(tr.iterates) <= 2
    assert tr.converged
    assert_allclose(tr.phi[-1], 2 * math.pi, rtol=1e-10)


def test_search_from_perturbed_constant():
    tr = extremizer_search(ONE + Y2 * 0.3, tol=1e-6)
    assert np.all(np.diff(tr.phi) >= -1e-12)
    assert tr.residual[-1] < 1e-5
    assert tr.phi[-1] >= 2 * math.pi - 1e-4


def test_search_from_cap_pair_improves():
    cap = Cap(NORTH, 0.3)
    f0 = antipodal_symmetrize(cap_indicator(cap))
    tr = extremizer_search(f0, L=4)
    assert tr.phi[-1] > tr.phi[0]


def test_search_random_starts_bounded(rng):
    for _ in range(3):
        tr = extremizer_search(random_even_start(rng, 4))
        assert np.all(tr.phi <= 2 * math.pi + 1e-4)
        if tr.converged:
            assert tr.residual[-1] < 1e-4


def test_search_errors():
    with pytest.raises(ParameterError):
        extremizer_search(ONE, damping=0.0)
    with pytest.raises(DegenerateInputError):
        extremizer_search(Harmonic.zeros(2))


def test_search_divergence_is_reported(monkeypatch):
    import restriction_lab.extremal as ex

    class Shrinking:
        def __init__(self):
            self.n = 0

        def apply(self, c):
            self.n += 1
            T = np.zeros(ex.n_coeffs(12))
            T[: c.size] = c * (10.0 - self.n)
            return 10.0 - self.n, T + 1e-3

    monkeypatch.setattr(ex, "triple_conv_operator", lambda L, even=False: Shrinking())
    with pytest.raises(SearchDivergence):
        ex.extremizer_search(ONE + Y2 * 0.1, tol=1e-14)
