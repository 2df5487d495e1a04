import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

import oracles
from restriction_lab.convolution import (
    ANTIPODAL_DISTANCE_KERNEL,
    DISTANCE_KERNEL,
    BallGrid,
    Kernel1D,
    cap_interaction,
    cap_pair_density,
    conv_density,
    conv_density_at,
    conv_inner,
    conv_l2_norm,
    funk_hecke_multiplier,
    kernel_conv,
    t_rho,
    triple_conv_at,
    triple_conv_on_sphere,
)
from restriction_lab.errors import IntegrabilityError, ParameterError, SingularPointError
from restriction_lab.extremal import zonal_ball_grid
from restriction_lab.sphere import (
    Cap,
    Harmonic,
    Pointwise,
    cap_indicator,
    make_quadrature,
    random_harmonic,
    random_rotation,
    random_unit_vectors,
)

NORTH = np.array([0.0, 0.0, 1.0])
ONE = Harmonic.constant(1.0)


def _random_ball_points(rng, n):
    return random_unit_vectors(rng, n) * rng.uniform(0.05, 1.95, n)[:, None]


# ---------------------------------------------------------------- density

def test_density_examples():
    assert_allclose(conv_density_at(ONE, ONE, [0.0, 0.6, 0.8]), 2 * math.pi, rtol=1e-13)
    assert conv_density_at(ONE, ONE, [2.5, 0.0, 0.0]) == 0.0
    y2 = Harmonic.ylm(2, 0)
    expected = -(math.pi / 4) * y2.evaluate(NORTH[None])[0]
    assert_allclose(conv_density_at(y2, ONE, NORTH), expected, rtol=1e-12)
    with pytest.raises(SingularPointError):
        conv_density_at(ONE, ONE, [0.0, 0.0, 0.0])


def test_density_matches_dense_circle_oracle(rng):
    f, g = random_harmonic(rng, 5), random_harmonic(rng, 4)
    x = _random_ball_points(rng, 30)
    assert_allclose(conv_density(f, g, x, m=12), oracles.conv_density(f.evaluate, g.evaluate, x),
                    atol=1e-10)


def test_cap_pair_density_matches_oracle(rng):
    c1, c2 = Cap(NORTH, 0.5), Cap([0.2, 0.1, 1.0], 0.4)
    a = random_unit_vectors(rng, 4000)
    a, b = a[c1.contains(a)][:100], a[c2.contains(a)][:100]
    x = np.vstack([a + b, a[:20] + b[-20:] + 0.05 * rng.standard_normal((20, 3))])
    exact = cap_pair_density(c1, c2, x)
    dense = oracles.conv_density(oracles.cap_indicator(c1.center, 0.5),
                                 oracles.cap_indicator(c2.center, 0.4), x, m=20000)
    assert np.count_nonzero(exact) > 100
    assert_allclose(exact, dense, atol=2e-3)


# ---------------------------------------------------------------- norms and inner products

def test_constant_norm():
    assert_allclose(conv_l2_norm(ONE, ONE), math.sqrt(32 * math.pi**3), rtol=1e-12)
    assert_allclose(conv_l2_norm(ONE, ONE, BallGrid.make()), math.sqrt(32 * math.pi**3), rtol=1e-6)
    assert conv_l2_norm(ONE, Harmonic.zeros(2)) == 0.0


def test_indicator_norm_matches_dense_oracle():
    r = 0.3
    f = cap_indicator(Cap(NORTH, r), normalized=True)
    h = math.sqrt(1 - r * r)
    ind = oracles.cap_indicator(NORTH, r)
    oracle = math.sqrt(oracles.zonal_conv_norm_sq(
        ind, ind, 64, 64, 2048, t_range=(2 * h, 2.0), theta_range=(0.0, math.asin(r))
    )) / oracles.cap_area(r)
    assert_allclose(conv_l2_norm(f, f, zonal_ball_grid()), oracle, rtol=1e-3)
    assert_allclose(conv_l2_norm(f, f), oracle, rtol=5e-3)


def test_inner_examples(rng):
    assert_allclose(conv_inner(ONE, ONE, ONE, ONE), 32 * math.pi**3, rtol=1e-12)
    f, g, h = (random_harmonic(rng, 3) for _ in range(3))
    assert conv_inner(f, Harmonic.zeros(3), g, h) == 0.0
    y2 = Harmonic.ylm(2, 0)
    assert_allclose(conv_inner(y2, y2, ONE, ONE), 8 * math.pi**2 / 5, rtol=1e-12)


@given(st.integers(0, 2**31), st.integers(1, 5), st.integers(1, 5))
def test_reflection_identity(seed, L1, L2):
    rng = np.random.default_rng(seed)
    f1, f2 = random_harmonic(rng, L1), random_harmonic(rng, L2)
    assert_allclose(conv_l2_norm(f1, f2), conv_l2_norm(f1, f2.reflected()), rtol=1e-6)


@given(st.integers(0, 2**31), st.lists(st.integers(1, 4), min_size=4, max_size=4))
def test_swap_identity(seed, degrees):
    rng = np.random.default_rng(seed)
    f1, f2, f3, f4 = (random_harmonic(rng, L) for L in degrees)
    a = conv_inner(f1, f2, f3, f4)
    b = conv_inner(f1, f3.reflected(), f2.reflected(), f4)
    scale = conv_l2_norm(f1, f2) * conv_l2_norm(f3, f4)
    assert abs(a - b) <= 1e-6 * scale


def test_identities_on_non_harmonic_inputs():
    f = Pointwise(lambda p: np.exp(p[:, 0] + 0.5 * p[:, 2]))
    g = Pointwise(lambda p: 1.0 + p[:, 1] ** 2)
    grid = BallGrid.make(32, 24, 49, 48)
    assert_allclose(conv_l2_norm(f, g, grid), conv_l2_norm(f, g.reflected(), grid), rtol=1e-6)


def test_refinement_convergence(rng):
    f, g = random_harmonic(rng, 4), random_harmonic(rng, 3)
    a, b, c = (conv_l2_norm(f, g, BallGrid.make(16 * s, 12 * s, 24 * s + 1, 24 * s))
               for s in (1, 2, 4))
    assert abs(b - a) < 1e-6 * b
    assert abs(c - b) < 1e-6 * c


def test_pointwise_equals_harmonic_path(rng):
    f = random_harmonic(rng, 4)
    grid = BallGrid.make(32, 24, 49, 48)
    assert_allclose(conv_l2_norm(Pointwise(f.evaluate), f, grid), conv_l2_norm(f, f), rtol=1e-10)


# ---------------------------------------------------------------- T_rho

def test_t_rho_constant():
    assert_allclose(t_rho(ONE, 0.7).values, 1.0, rtol=1e-14)
    with pytest.raises(ParameterError):
        t_rho(ONE, 2.0)


@pytest.mark.parametrize("rho", [0.3, 1.0, math.sqrt(2), 1.9])
def test_t_rho_eigenrelation(rho, rng):
    rule = make_quadrature(12, 24)
    for k in range(11):
        c = np.zeros((k + 1) ** 2)
        c[k * k:] = rng.standard_normal(2 * k + 1)
        Y = Harmonic(c)
        out = t_rho(Y, rho, rule)
        mult = oracles.legendre(k, 1 - rho * rho / 2)
        assert np.max(np.abs(out.values - mult * Y.samples(rule))) < 1e-8


def test_t_rho_examples():
    rule = make_quadrature(8, 16)
    y1, y2 = Harmonic.ylm(1, 0), Harmonic.ylm(2, 0)
    assert np.max(np.abs(t_rho(y1, math.sqrt(2), rule).values)) < 1e-12
    assert_allclose(t_rho(y2, math.sqrt(2), rule).values, -0.5 * y2.samples(rule), atol=1e-12)


# ---------------------------------------------------------------- Funk-Hecke

@pytest.mark.parametrize("k", range(11))
def test_distance_kernel_multipliers(k):
    assert_allclose(funk_hecke_multiplier(DISTANCE_KERNEL, k), 4 * math.pi / (2 * k + 1), rtol=1e-8)
    assert_allclose(funk_hecke_multiplier(ANTIPODAL_DISTANCE_KERNEL, k),
                    (-1) ** k * 4 * math.pi / (2 * k + 1), rtol=1e-8)


def test_smooth_kernel_against_oracle():
    K = Kernel1D(lambda t: np.exp(2 * t) * (1 + t * t))
    for k in range(8):
        assert_allclose(funk_hecke_multiplier(K, k),
                        oracles.funk_hecke(lambda t: math.exp(2 * t) * (1 + t * t), k),
                        rtol=1e-10, atol=1e-12)
    assert abs(funk_hecke_multiplier(Kernel1D(lambda t: np.ones_like(t)), 2)) < 1e-12


def test_singular_kernel_with_plain_callable():
    K = Kernel1D(lambda t: (2 - 2 * t) ** -0.25, singular_at=1)
    # 2π ∫(2-2t)^{-1/4} dt with s = 2 - 2t
    expected = 2 * math.pi * 2 ** 1.5 / 1.5
    assert_allclose(funk_hecke_multiplier(K, 0), expected, rtol=1e-8)


def test_non_integrable_kernel_rejected():
    K = Kernel1D(lambda t: 1.0 / (2 - 2 * t), singular_at=1, func_u=lambda u: u ** -2.0)
    with pytest.raises(IntegrabilityError):
        funk_hecke_multiplier(K, 0)
    with pytest.raises(ParameterError):
        Kernel1D(lambda t: t, singular_at=0)


def test_kernel_conv_examples():
    y2 = Harmonic.ylm(2, 0)
    out = kernel_conv(y2, DISTANCE_KERNEL)
    assert np.linalg.norm(out.coeffs - 4 * math.pi / 5 * y2.coeffs) < 1e-8
    assert_allclose(kernel_conv(ONE, DISTANCE_KERNEL).evaluate(NORTH[None]), 4 * math.pi, rtol=1e-10)
    y1 = Harmonic.ylm(1, 1)
    out = kernel_conv(y1, ANTIPODAL_DISTANCE_KERNEL)
    assert np.linalg.norm(out.coeffs + 4 * math.pi / 3 * y1.coeffs) < 1e-8
    with pytest.raises(ParameterError):
        kernel_conv(Pointwise(lambda p: p[:, 0]), DISTANCE_KERNEL)


def test_kernel_conv_diagonality():
    for k in range(11):
        c = np.zeros((k + 1) ** 2)
        c[k * k + k] = 1.0
        Y = Harmonic(c)
        out = kernel_conv(Y, DISTANCE_KERNEL)
        assert np.linalg.norm(out.coeffs - 4 * math.pi / (2 * k + 1) * Y.coeffs) < 1e-8


# ---------------------------------------------------------------- triple convolution

def test_triple_conv_constant():
    T = triple_conv_on_sphere(ONE)
    assert_allclose(T.evaluate(random_unit_vectors(np.random.default_rng(1), 10)),
                    8 * math.pi**2, rtol=1e-12)
    assert_allclose(8 * math.pi**2, 2 * math.pi * 4 * math.pi, rtol=1e-15)
    assert np.all(triple_conv_on_sphere(Harmonic.zeros(2)).coeffs == 0.0)
    direct = triple_conv_at(ONE, random_unit_vectors(np.random.default_rng(2), 5))
    assert_allclose(direct, 8 * math.pi**2, rtol=1e-6)


def test_triple_conv_galerkin_matches_direct_quadrature(rng):
    f = random_harmonic(rng, 3)
    z = random_unit_vectors(rng, 6)
    galerkin = triple_conv_on_sphere(f).evaluate(z)
    direct = triple_conv_at(f, z)
    assert_allclose(direct, galerkin, rtol=1e-6, atol=1e-6 * np.max(np.abs(galerkin)))


def test_triple_conv_rotation_equivariance(rng):
    f = random_harmonic(rng, 3)
    R = random_rotation(rng)
    z = random_unit_vectors(rng, 20)
    Tf = triple_conv_on_sphere(f)
    Tg = triple_conv_on_sphere(f.rotated(R))
    assert_allclose(Tg.evaluate(z), Tf.evaluate(z @ R.T), atol=1e-8 * np.max(np.abs(Tf.coeffs)))


# ---------------------------------------------------------------- cap interaction

def test_cap_interaction_matches_oracle():
    r1, r2 = 0.5, 0.25
    c1, c2 = Cap(NORTH, r1), Cap(NORTH, r2)
    h1, h2 = math.sqrt(1 - r1 * r1), math.sqrt(1 - r2 * r2)
    oracle = math.sqrt(oracles.zonal_conv_norm_sq(
        oracles.cap_indicator(NORTH, r1), oracles.cap_indicator(NORTH, r2), 64, 64, 2048,
        t_range=(h1 + h2, 2.0), theta_range=(0.0, math.asin(r1)),
    )) / math.sqrt(c1.area * c2.area)
    assert_allclose(cap_interaction(c1, c2), oracle, rtol=1e-3)


def test_cap_interaction_equals_normalized_conv_norm():
    c1, c2 = Cap(NORTH, 0.5), Cap([0.3, 0.0, 1.0], 0.4)
    grid = BallGrid.make(96, 64, 129, 128)
    ref = conv_l2_norm(cap_indicator(c1), cap_indicator(c2), grid)
    assert_allclose(cap_interaction(c1, c2, normalized=False), ref, rtol=5e-3)
