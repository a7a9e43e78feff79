import numpy as np
import pytest
from hypothesis import given, strategies as st

from moyal_dirac import dirac as D
from moyal_dirac.lattice import LatticeError, SpinorField, make_lattice, random_spinor, \
    sample_spacetime_packet, slice_times

LAT = make_lattice(1, (64,), (32.0,))
M = D.make_free_model(2, LAT, 1.0)
TIMES = slice_times(256, 8.0)
seeds = st.integers(0, 2 ** 16)


def packet(t0=0.0, x0=0.0, p=0.5, w=(1, 0.4j), tw=0.6):
    return sample_spacetime_packet(TIMES, LAT, t0, tw, (x0,), 1.2, (p,), w)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_clifford_relations(n):
    rep = D.build_clifford(n)
    assert rep.anticommutator_defect() < 1e-14
    assert np.allclose(rep.beta, rep.beta.conj().T)
    with pytest.raises(D.CliffordError):
        D.build_clifford(5)


@pytest.mark.parametrize("n,shape", [(2, (32,)), (3, (16, 16)), (4, (8, 8, 8))])
def test_h0_hermitian_and_majorana(n, shape, rng):
    lat = make_lattice(n - 1, shape, (8.0,) * (n - 1))
    m = D.make_free_model(n, lat, 1.3)
    u, v = random_spinor(lat, m.N, rng), random_spinor(lat, m.N, rng)
    lhs = np.vdot(u.components, D.apply_h0(m, v).components)
    rhs = np.vdot(D.apply_h0(m, u).components, v.components)
    assert abs(lhs - rhs) < 1e-12 * abs(lhs)
    JHJ = D.charge_conjugate(m, D.apply_h0(m, D.charge_conjugate(m, v)))
    assert np.abs(JHJ.components + D.apply_h0(m, v).components).max() < 1e-12 * np.abs(v.components).max() * 10
    a = D.charge_conjugate(m, D.free_propagate(m, v, 0.7))
    b = D.free_propagate(m, D.charge_conjugate(m, v), 0.7)
    assert np.abs(a.components - b.components).max() < 1e-12 * np.abs(v.components).max() * 10


@given(seed=seeds, t=st.floats(-5, 5), s=st.floats(-5, 5))
def test_free_flow_group_and_unitarity(seed, t, s):
    v = random_spinor(LAT, 2, np.random.default_rng(seed))
    a = D.free_propagate(M, D.free_propagate(M, v, t), s)
    b = D.free_propagate(M, v, t + s)
    assert np.linalg.norm(a.components - b.components) < 1e-12 * v.norm() * 10
    assert D.free_propagate(M, v, t).norm() == pytest.approx(v.norm(), rel=1e-13)


def test_positive_projector(rng):
    v = random_spinor(LAT, 2, rng)
    P = lambda x, s=1: D.positive_frequency_project(M, x, s)
    assert np.allclose(P(P(v)).components, P(v).components, atol=1e-12)
    total = P(v).components + P(v, -1).components
    assert np.allclose(total, v.components, atol=1e-12)
    Jm = D.charge_conjugate(M, P(D.charge_conjugate(M, v)))
    assert np.allclose(Jm.components, P(v, -1).components, atol=1e-12)


def test_free_solution_solves_dirac_equation():
    v, _ = __import__("moyal_dirac.lattice", fromlist=["x"]).sample_gaussian_packet(LAT, (0.0,), 1.2, (0.4,), (1, 0.3))
    sol = D.free_solution(M, v, TIMES)
    r = D.apply_dirac(M, sol, "spectral")
    # the periodic time derivative only sees the interior cleanly; the slice at t = 0 is exact
    assert np.abs(sol.data[128] - v.components).max() < 1e-14
    assert r.data.shape == sol.data.shape


@pytest.mark.parametrize("which", ["retarded", "advanced"])
def test_fundamental_solution_residual_and_support(which):
    f = packet()
    chi = D.fundamental_solution(M, f, which)
    r = D.apply_dirac(M, chi, "centered", 8).data - f.data
    assert np.linalg.norm(r[4:-4]) < 1e-5 * np.linalg.norm(f.data)
    outside = TIMES < -4 if which == "retarded" else TIMES > 4
    assert np.linalg.norm(chi.data[outside]) < 1e-7 * np.linalg.norm(chi.data)


def test_causal_is_difference_and_solves_free_equation():
    f = packet()
    R = D.causal_propagator(M, f)
    diff = D.fundamental_solution(M, f, "retarded").data - D.fundamental_solution(M, f, "advanced").data
    assert np.abs(R.data - diff).max() < 1e-12 * np.abs(R.data).max()
    datum = D.causal_datum(M, f)
    back = D.free_solution(M, datum, TIMES)
    assert np.abs(back.data - R.data).max() < 1e-10 * np.abs(R.data).max()


def test_off_grid_evaluation_matches_grid():
    f = packet()
    chi = D.fundamental_solution(M, f, "retarded")
    idx = [10, 100, 200]
    sl = D.fundamental_solution(M, f, "retarded", at_times=TIMES[idx])
    for i, s in zip(idx, sl):
        assert np.abs(s.components - chi.data[i]).max() < 1e-12 * np.abs(chi.data).max()


def test_source_must_fit_window():
    lat = LAT
    data = np.ones((256, 2, 64), complex)
    from moyal_dirac.lattice import SpacetimeSpinorField
    with pytest.raises(D.SupportError):
        D.fundamental_solution(M, SpacetimeSpinorField(TIMES, lat, data))


def test_model_rejects_mismatch():
    with pytest.raises(LatticeError):
        D.make_free_model(3, LAT)
    with pytest.raises(ValueError):
        D.make_free_model(2, LAT, 0.0)


@given(seed=seeds)
def test_solution_form_positive_and_hermitian(seed):
    r = np.random.default_rng(seed)
    w = r.standard_normal(2) + 1j * r.standard_normal(2)
    f = packet(r.uniform(-1, 1), r.uniform(-2, 2), r.uniform(-1, 1), w, r.uniform(0.5, 0.8))
    h = packet(r.uniform(-1, 1), r.uniform(-2, 2), r.uniform(-1, 1), w[::-1], 0.6)
    ff = D.SOLUTION_PHASE * D.solution_inner(M, f, f)
    assert ff.real >= -1e-10 * abs(ff) and abs(ff.imag) < 1e-10 * abs(ff)
    fh = D.SOLUTION_PHASE * D.solution_inner(M, f, h)
    hf = D.SOLUTION_PHASE * D.solution_inner(M, h, f)
    assert abs(fh - np.conj(hf)) < 1e-10 * abs(fh)


def test_kernel_of_causal_form():
    """(Dg, h)_R vanishes and R D g has no Cauchy datum."""
    g = packet(0.3, 0.5, 0.2, (0.4, 1), 0.7)
    Dg = D.apply_dirac(M, g, "spectral")
    h = packet()
    pair = abs(D.solution_inner(M, Dg, h)) / (np.sqrt(abs(D.solution_inner(M, h, h))) * Dg.norm() * 4.0)
    assert pair < 1e-6
    assert D.causal_datum(M, Dg).norm() < 1e-6 * D.causal_datum(M, g).norm()


def test_conventions_are_stable():
    assert D.conventions_hash() == D.conventions_hash()
    doc = D.conventions()
    assert doc["solution_form_phase_kappa"] == "i" and doc["derivative_constant_kappa_prime"] == "+1"
    assert D.SOLUTION_PHASE == 1j and D.DERIVATIVE_PHASE == 1.0


def test_stencil_weights():
    x = np.linspace(0, 1, 64, endpoint=False)
    for order in (2, 4, 8):
        w = D.centered_difference_weights(order)
        h = x[1]
        d = sum(c * (np.sin(2 * np.pi * (x + j * h)) - np.sin(2 * np.pi * (x - j * h)))
                for j, c in enumerate(w, 1)) / (2 * h)
        assert np.abs(d - 2 * np.pi * np.cos(2 * np.pi * x)).max() < 10 * (2 * np.pi * h) ** order * 2 * np.pi
