import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from moyal_dirac.lattice import ScalarField, make_lattice
from moyal_dirac.moyal import (ThetaError, ThetaMatrix, left_matrix, make_context, right_matrix, star,
                               star_arrays)
from moyal_dirac.quadrature import moyal_quadrature_2d, plane_wave_phase
from moyal_dirac.experiments import ORACLE_CASE, oracle_gaussians, quadrature_oracle_error

DATA = np.load(__import__("pathlib").Path(__file__).parent / "data" / "moyal_quadrature.npz")
thetas = st.floats(0.1, 2.0)
seeds = st.integers(0, 2 ** 16)


def gaussians(lat, rng, count=3):
    X = lat.coords()
    out = np.zeros(lat.shape, complex)
    for _ in range(count):
        c = rng.uniform(-1.5, 1.5, lat.dim)
        w = rng.uniform(0.8, 1.3)
        out += (rng.standard_normal() + 1j * rng.standard_normal()) * \
            np.exp(-0.5 * sum((x - ci) ** 2 for x, ci in zip(X, c)) / w ** 2)
    return out


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


LAT = make_lattice(2, (128, 128), (24.0, 24.0))


def test_theta_validation():
    with pytest.raises(ThetaError):
        ThetaMatrix(np.eye(2))
    with pytest.raises(ThetaError):
        make_context(LAT, ThetaMatrix.four_dim(1.0))
    assert ThetaMatrix.commutative_time(1.0).entries[0].tolist() == [0, 0, 0]


@given(theta=thetas, seed=seeds)
def test_associativity(theta, seed):
    rng = np.random.default_rng(seed)
    ctx = make_context(LAT, ThetaMatrix.symplectic_2d(theta))
    f, g, h = (gaussians(LAT, rng) for _ in range(3))
    lhs = star_arrays(ctx, star_arrays(ctx, f, g), h)
    rhs = star_arrays(ctx, f, star_arrays(ctx, g, h))
    assert rel(lhs, rhs) < 1e-9


@given(theta=thetas, seed=seeds)
def test_unit_trace_conjugation(theta, seed):
    rng = np.random.default_rng(seed)
    ctx = make_context(LAT, ThetaMatrix.symplectic_2d(theta))
    f, h = gaussians(LAT, rng), gaussians(LAT, rng)
    one = np.ones(LAT.shape)
    assert rel(star_arrays(ctx, one, f), f) < 1e-12
    assert rel(star_arrays(ctx, f, one), f) < 1e-12
    assert abs(star_arrays(ctx, f, h).sum() - (f * h).sum()) < 1e-9 * np.abs(f * h).sum()
    assert rel(np.conj(star_arrays(ctx, f, h)), star_arrays(ctx, np.conj(h), np.conj(f))) < 1e-10


@given(seed=seeds)
def test_theta_zero_is_pointwise(seed):
    rng = np.random.default_rng(seed)
    f, h = gaussians(LAT, rng), gaussians(LAT, rng)
    ctx = make_context(LAT, ThetaMatrix.zero(2))
    assert np.array_equal(star_arrays(ctx, f, h), f * h)
    small = make_context(LAT, ThetaMatrix.symplectic_2d(1e-14))
    assert rel(star_arrays(small, f, h), f * h) < 1e-12


@given(theta=thetas, seed=seeds)
def test_block_and_direct_routes_agree(theta, seed):
    rng = np.random.default_rng(seed)
    lat = make_lattice(2, (8, 16), (4.0, 6.0))
    ctx = make_context(lat, ThetaMatrix.symplectic_2d(theta))
    f = rng.standard_normal(lat.shape) + 1j * rng.standard_normal(lat.shape)
    h = rng.standard_normal(lat.shape) + 1j * rng.standard_normal(lat.shape)
    assert rel(star_arrays(ctx, f, h, "direct"), star_arrays(ctx, f, h, "blocks")) < 1e-12


def test_general_theta_uses_direct_route(rng):
    lat = make_lattice(3, (4, 4, 4), (3.0, 3.0, 3.0))
    T = np.array([[0, 0.3, 0.5], [-0.3, 0, 0.7], [-0.5, -0.7, 0]])
    ctx = make_context(lat, ThetaMatrix(T))
    assert ctx.plans is None
    f = rng.standard_normal(lat.shape)
    with pytest.raises(ThetaError):
        star_arrays(ctx, f, f, "blocks")
    assert star_arrays(ctx, f, f).shape == lat.shape


def test_plane_waves_pick_up_exact_phase():
    ctx = make_context(LAT, ThetaMatrix.symplectic_2d(0.7))
    X, Y = LAT.coords()
    k = 2 * np.pi * np.array([2, -1]) / 24.0
    p = 2 * np.pi * np.array([-3, 4]) / 24.0
    e = lambda q: np.exp(1j * (q[0] * X + q[1] * Y))
    prod = star_arrays(ctx, e(k), e(p))
    want = plane_wave_phase(k, p, ctx.theta.entries) * e(k + p)
    assert np.abs(prod - want).max() < 1e-12


def test_windowed_coordinate_commutator():
    """x_w * y_w - y_w * x_w at the origin against its closed-form Moyal series."""
    lat = make_lattice(2, (256, 256), (64.0, 64.0))
    X, Y = (np.broadcast_to(c, lat.shape) for c in lat.coords())
    s, th = 4.0, 1.0
    xw, yw = X * np.exp(-X ** 2 / (2 * s * s)), Y * np.exp(-Y ** 2 / (2 * s * s))
    ctx = make_context(lat, ThetaMatrix.symplectic_2d(th))
    comm = star_arrays(ctx, xw, yw) - star_arrays(ctx, yw, xw)
    # only odd orders survive; odd derivatives of x e^{-x^2/2s^2} at 0 are 1, -3/s^2, 15/s^4, ...
    d = [1.0, -3 / s ** 2, 15 / s ** 4, -105 / s ** 6]
    want = sum(2 * (0.5j * th) ** n / math.factorial(n) * d[i] ** 2 for i, n in enumerate((1, 3, 5, 7)))
    assert abs(comm[128, 128] - want) < 1e-8
    assert abs(want - 1j * th) > 1e-3   # the correction is visible, so the test is not vacuous


def test_left_right_matrices(rng):
    lat = make_lattice(2, (8, 8), (5.0, 5.0))
    ctx = make_context(lat, ThetaMatrix.symplectic_2d(0.5))
    b = rng.standard_normal(lat.shape)
    v = rng.standard_normal(lat.shape) + 1j * rng.standard_normal(lat.shape)
    assert rel((left_matrix(ctx, b) @ v.ravel()).reshape(lat.shape), star_arrays(ctx, b, v)) < 1e-12
    assert rel((right_matrix(ctx, b) @ v.ravel()).reshape(lat.shape), star_arrays(ctx, v, b)) < 1e-12


def test_scalar_star_checks_lattice():
    ctx = make_context(LAT, ThetaMatrix.symplectic_2d(1.0))
    other = make_lattice(2, (32, 32), (24.0, 24.0))
    with pytest.raises(ValueError):
        star(ctx, ScalarField(other, np.ones(other.shape)), ScalarField(LAT, np.ones(LAT.shape)))


# -- frozen quadrature oracle ---------------------------------------------------

def _fft_star(n):
    L = float(DATA[f"box_{n}"])
    lat = make_lattice(2, (n, n), (L, L))
    X, Y = (np.broadcast_to(c, lat.shape) for c in lat.coords())
    f, h = oracle_gaussians(dict(ORACLE_CASE, width=float(DATA["width"]),
                                 f_center=tuple(DATA["f_center"]), h_center=tuple(DATA["h_center"])))
    ctx = make_context(lat, ThetaMatrix.symplectic_2d(float(DATA["theta"])))
    return star_arrays(ctx, f(X, Y), h(X, Y))


def test_frozen_oracle_16():
    assert rel(_fft_star(16), DATA["star_16"]) < 1e-6


def test_frozen_oracle_32():
    assert rel(_fft_star(32), DATA["star_32"]) < 1e-9


def test_frozen_case_matches_experiment():
    assert float(DATA["box_16"]) == ORACLE_CASE["box"]
    assert float(DATA["width"]) == ORACLE_CASE["width"]
    assert float(DATA["quadrature_self_error"]) < 1e-11


@pytest.mark.slow
def test_quadrature_recomputation_matches_frozen():
    f, h = oracle_gaussians()
    pts = DATA["points_16"]
    th = float(DATA["theta"])
    T = np.array([[0.0, th], [-th, 0.0]])
    q = moyal_quadrature_2d(f, h, T, pts, **ORACLE_CASE["quadrature"])
    assert rel(q, DATA["star_16"].ravel()) < 1e-12
    assert quadrature_oracle_error() < 1e-6
