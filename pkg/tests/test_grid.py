import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from swlab import constants as C
from swlab.grid import (CutoffProfile, Grid2, Grid3, GridError, WeightSpec, build_grid, chi,
                        clifford_rho, cutoff_eval, deriv, laplacian5, sigma_map, weighted_norm)

finite = st.floats(-3, 3, allow_nan=False)


def test_build_grid_radius():
    g = build_grid((128, 128), 0.15)
    assert isinstance(g, Grid2)
    assert g.radius == pytest.approx(9.6)
    assert build_grid((16, 16), 1.0).radius == 8.0
    assert isinstance(build_grid((16, 16, 8), 1.0), Grid3)


@pytest.mark.parametrize("dims,h", [((8, 8), 1.0), ((16, 16), float("nan")), ((16, 16), -1.0),
                                    ((16, 16), float("inf")), ((16, 16, 4), 1.0), ((16, 16), 0.1)])
def test_build_grid_rejects(dims, h):
    with pytest.raises(GridError):
        build_grid(dims, h)


def test_grid_coordinates_reproducible():
    a = build_grid((33, 40), 0.3, 1 - 2j)
    b = build_grid((33, 40), 0.3, 1 - 2j)
    assert np.array_equal(a.z, b.z)
    assert a.x[a.nx // 2] == 1.0 and a.y[a.ny // 2] == -2.0


def test_grid3_extent():
    g = Grid3(32, 32, 20, 0.25)
    assert g.L3 == pytest.approx(0.25 * 20 / 2)


def test_cutoff_examples():
    assert chi(0.0, 3.0) == 1.0
    assert chi(9.0, 3.0) == 0.0
    d = 1.7
    assert cutoff_eval(CutoffProfile("one_sided", d), 2 * d) == 1.0
    assert cutoff_eval(CutoffProfile("one_sided", d), -d) == 0.0
    lam = CutoffProfile("even", 2.0)
    assert cutoff_eval(lam, 1.9) == 1.0 and cutoff_eval(lam, -4.1) == 0.0


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(["radial", "one_sided", "even"]), st.floats(0.2, 20), st.floats(-60, 60))
def test_cutoff_range_and_plateaus(kind, scale, x):
    prof = CutoffProfile(kind, scale)
    v = float(cutoff_eval(prof, x))
    assert 0.0 <= v <= 1.0
    if kind in ("radial", "even"):
        if abs(x) <= scale:
            assert v == 1.0
        if abs(x) >= 2 * scale:
            assert v == 0.0
        assert v == float(cutoff_eval(prof, -x))
    else:
        if x >= scale:
            assert v == 1.0
        if x <= -scale:
            assert v == 0.0


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(["radial", "one_sided", "even"]), st.floats(0.5, 10))
def test_cutoff_derivative_bound(kind, scale):
    prof = CutoffProfile(kind, scale)
    x = np.linspace(-3 * scale, 3 * scale, 6001)
    d = np.abs(np.diff(cutoff_eval(prof, x))) / (x[1] - x[0])
    # transition bands have width scale (even/radial) or 2*scale (one-sided)
    assert d.max() * scale <= 15 / 8 + 1e-6


def test_weight_invariants():
    spec = WeightSpec(1.25, 3.0, "x")
    f = np.linspace(-40, 40, 4001)
    s = spec.varsigma(f)
    assert np.all(s >= 1.0)
    assert np.all(s[np.abs(f) <= 3.0] == 1.0)
    far = np.abs(f) >= 6.0
    assert np.allclose(s[far], np.abs(f[far]) / 3.0, rtol=0, atol=1e-15)
    grad = np.abs(np.diff(s)) / (f[1] - f[0])
    assert grad.max() * 3.0 < 3.0
    with pytest.raises(ValueError):
        WeightSpec(1.5, 1.0)
    with pytest.raises(ValueError):
        WeightSpec(1.0, 0.0)


def test_weighted_norm_unweighted_cases(rng):
    g = Grid2(64, 64, 0.25)
    f = rng.normal(size=g.shape)
    plain = float(np.sqrt(np.sum(g.trapezoid_weights() * f**2)))
    assert weighted_norm(f, g, WeightSpec(0.0, 2.0, "radial")) == plain
    X, Y = g.mesh()
    bumpy = f * (np.hypot(X, Y) <= 2.0)
    ref = float(np.sqrt(np.sum(g.trapezoid_weights() * bumpy**2)))
    assert weighted_norm(bumpy, g, WeightSpec(1.25, 2.0, "radial")) == ref


def test_weighted_norm_point_bump():
    # one node of unit value at |f| = 4R: h * 4^eps
    g = Grid2(128, 32, 0.25)
    R, eps = 3.0, 1.25
    f = np.zeros(g.shape)
    i = int(np.argmin(np.abs(g.x - 4 * R)))
    assert g.x[i] == pytest.approx(4 * R)
    f[i, g.ny // 2] = 1.0
    val = weighted_norm(f, g, WeightSpec(eps, R, "x"))
    assert val == pytest.approx(g.h * 4**eps, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 1.4), st.floats(0.0, 1.4), st.integers(0, 2), st.integers(0, 2**31))
def test_weighted_norm_monotone_in_eps(e1, e2, k, seed):
    e1, e2 = sorted((e1, e2))
    g = Grid2(32, 32, 0.5)
    f = np.random.default_rng(seed).normal(size=g.shape)
    a = weighted_norm(f, g, WeightSpec(e1, 1.5, "radial"), k=k)
    b = weighted_norm(f, g, WeightSpec(e2, 1.5, "radial"), k=k)
    assert a <= b * (1 + 1e-14)


def test_weighted_norm_errors():
    g = Grid2(32, 32, 0.5)
    with pytest.raises(GridError):
        weighted_norm(np.zeros((3, 3)), g, WeightSpec(1.0, 1.0, "radial"))
    with pytest.raises(ValueError):
        weighted_norm(np.zeros(g.shape), g, WeightSpec(1.0, 1.0, "radial"), k=3)
    with pytest.raises(GridError):
        weighted_norm(np.zeros(g.shape), g, WeightSpec(1.0, 1.0, "x3"))


@settings(max_examples=40, deadline=None)
@given(finite, finite, finite, finite, finite, finite)
def test_central_difference_exact_on_quadratics(a, b, c, d, e, f0):
    g = Grid2(20, 24, 0.45)
    X, Y = g.mesh()
    F = a * X**2 + b * X * Y + c * Y**2 + d * X + e * Y + f0
    dx = deriv(F, 0, g.h)
    dy = deriv(F, 1, g.h)
    scale = 1 + abs(a) + abs(b) + abs(c) + abs(d) + abs(e)
    assert np.max(np.abs(dx - (2 * a * X + b * Y + d))) <= 1e-12 * scale * 10
    assert np.max(np.abs(dy - (b * X + 2 * c * Y + e))) <= 1e-12 * scale * 10
    lap = laplacian5(F, g.h)[1:-1, 1:-1]
    assert np.max(np.abs(lap - 2 * (a + c))) <= 1e-10 * scale * 10


def test_clifford_relations():
    I = np.eye(2)
    for i, gi in enumerate(C.GAMMAS):
        assert np.allclose(gi.conj().T, -gi, atol=0)
        for j, gj in enumerate(C.GAMMAS):
            err = np.abs(gi @ gj + gj @ gi + 2 * (i == j) * I).max()
            assert err < 1e-14


def test_clifford_rho_examples():
    g3 = clifford_rho(one_form=(0, 0, 1))
    assert np.array_equal(g3, np.diag([1j, -1j]))
    g1 = clifford_rho(one_form=(1, 0, 0))
    assert np.allclose(g1 @ g1, -np.eye(2))
    assert np.array_equal(clifford_rho(two_form=(0, 0, 1)) - clifford_rho(one_form=(0, 0, 1)),
                          np.zeros((2, 2)))
    with pytest.raises(ValueError):
        clifford_rho()


@settings(max_examples=30, deadline=None)
@given(st.lists(finite, min_size=6, max_size=6), st.floats(-2, 2))
def test_clifford_rho_linear(c, s):
    a, b = np.array(c[:3]), np.array(c[3:])
    lhs = clifford_rho(one_form=a + s * b)
    rhs = clifford_rho(one_form=a) + s * clifford_rho(one_form=b)
    assert np.allclose(lhs, rhs, atol=1e-13)


def test_sigma_examples(rng):
    assert np.array_equal(sigma_map(np.zeros(2), np.zeros(2)), np.zeros((2, 2)))
    assert np.allclose(sigma_map([1, 0], [1, 0]), 0.5 * C.GAMMA3, atol=0)
    psi = rng.normal(size=(2, 50)) + 1j * rng.normal(size=(2, 50))
    s = sigma_map(psi, psi)
    assert np.abs(s[0, 0] + s[1, 1]).max() < 1e-15


@settings(max_examples=30, deadline=None)
@given(st.lists(finite, min_size=8, max_size=8))
def test_sigma_traceless_antihermitian(v):
    psi = np.array(v[0:2]) + 1j * np.array(v[2:4])
    phi = np.array(v[4:6]) + 1j * np.array(v[6:8])
    s = sigma_map(psi, phi)
    assert abs(np.trace(s)) < 1e-13
    # i times a hermitian matrix is anti-hermitian; symmetric in its arguments
    assert np.allclose(s.conj().T, -s, atol=1e-13)
    assert np.allclose(sigma_map(phi, psi), s, atol=1e-13)
