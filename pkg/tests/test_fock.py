import numpy as np
import pytest
from hypothesis import given, strategies as st

from moyal_dirac import dirac as D
from moyal_dirac import fock as F
from moyal_dirac.lattice import make_lattice, sample_spacetime_packet, slice_times
from tests.oracles.fock_gamma import gamma, one_particle

LAT = make_lattice(1, (64,), (32.0,))
MODEL = D.make_free_model(2, LAT)
T = slice_times(128, 8.0)
SEEDS = [sample_spacetime_packet(T, LAT, 0.0, 0.6, (x,), 1.0, (p,), w)
         for x, p, w in [(-2, 0.5, (1, 0.3j)), (1.5, -0.4, (0.2, 1)), (0, 0.0, (1, 1j)), (-0.8, 0.9, (1j, 0.4)),
                         (2.5, -0.2, (0.6, -0.5j)), (-3.0, -0.6, (0.3j, 1))]]


def space(M):
    sp = F.build_mode_space(MODEL, SEEDS, M=M)
    return sp, F.build_fock(sp)


@pytest.mark.parametrize("M", [1, 3, 6])
def test_car_self_duality_vacuum(M):
    sp, fk = space(M)
    rep = F.car_defects(fk, sp)
    assert rep.car < 1e-10 and rep.self_duality < 1e-10 and rep.vacuum < 1e-14
    assert np.abs(sp.gram - np.eye(2 * M)).max() < 1e-12
    assert sp.j_defect() < 1e-12 and sp.pplus_defect() < 1e-12


def test_kernel_seed_rejected_and_field_vanishes():
    g = sample_spacetime_packet(T, LAT, 0.0, 0.7, (0.5,), 1.0, (0.2,), (1, 0.5))
    Dg = D.apply_dirac(MODEL, g, "spectral")
    sp = F.build_mode_space(MODEL, SEEDS[:2] + [Dg])
    assert [i for i, _ in sp.rejected] == [2]
    fk = F.build_fock(sp)
    psi, _ = F.field_operator(fk, sp, Dg, strict=False)
    assert np.linalg.norm(psi, 2) < 1e-6


def test_field_anticommutator_is_solution_form():
    sp, fk = space(4)
    pf, _ = F.field_operator(fk, sp, SEEDS[0])
    ph, _ = F.field_operator(fk, sp, SEEDS[1])
    kappa = D.SOLUTION_PHASE * D.solution_inner(MODEL, SEEDS[0], SEEDS[1])
    anti = pf.conj().T @ ph + ph @ pf.conj().T
    assert np.abs(anti - kappa * np.eye(fk.dim)).max() < 1e-8 * abs(kappa)


def test_strict_projection_budget():
    sp, fk = space(1)
    with pytest.raises(F.ModeSpaceError):
        F.field_operator(fk, sp, SEEDS[5])


def test_mode_limits():
    with pytest.raises(F.ModeSpaceError):
        F.build_mode_space(MODEL, SEEDS[:1], M=3)


@given(seed=st.integers(0, 2 ** 16), M=st.integers(1, 3))
def test_implementer_matches_second_quantization(seed, M):
    """Null-space implementer equals Gamma(u) built from occupation states, up to phase."""
    sp, fk = space(M)
    r = np.random.default_rng(seed)
    u, _ = np.linalg.qr(r.standard_normal((M, M)) + 1j * r.standard_normal((M, M)))
    imp = F.implement_bogoliubov(fk, sp, one_particle(u))
    assert imp.null_dim == 1
    assert imp.intertwining < 1e-7 and imp.unitarity < 1e-7
    assert F.phase_equal(imp.S, gamma(fk, u)) < 1e-10


def test_implementer_rejects_non_unitary():
    sp, fk = space(2)
    with pytest.raises(F.ImplementerError):
        F.implement_bogoliubov(fk, sp, 2 * np.eye(4))


def test_polar_and_j_symmetrize(rng):
    sp, _ = space(3)
    A = np.eye(6) + 0.01 * (rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6)))
    As, jd = F.j_symmetrize(sp, A)
    assert jd > 0
    assert np.abs(sp.J_matrix @ np.conj(As) @ sp.J_matrix - As).max() < 1e-15
    U, ud = F.polar_unitary(As)
    assert np.abs(U.conj().T @ U - np.eye(6)).max() < 1e-13 and ud > 0


@given(seed=st.integers(0, 2 ** 16))
def test_generator_commutator(seed):
    sp, fk = space(3)
    r = np.random.default_rng(seed)
    h = r.standard_normal((3, 3)) + 1j * r.standard_normal((3, 3))
    h = h + h.conj().T
    A = one_particle(1j * h)     # anti-Hermitian, J-compatible, particle-number conserving
    gen = F.quadratic_generator(fk, sp, A)
    assert gen.commutator < 1e-12 and gen.self_adjoint < 1e-12
    assert abs(fk.vacuum.conj() @ gen.Y @ fk.vacuum) < 1e-14


def test_generator_rejects_incompatible():
    sp, fk = space(2)
    with pytest.raises(F.ModeSpaceError):
        F.quadratic_generator(fk, sp, np.eye(4))


def test_matrix_export_round_trip(tmp_path, rng):
    M = rng.standard_normal((5, 3)) + 1j * rng.standard_normal((5, 3))
    binp, meta = F.export_matrix(tmp_path / "lambda=0.1_S", M)
    assert binp.name == "lambda=0.1_S.bin" and meta.name == "lambda=0.1_S.json"
    assert binp.stat().st_size == 5 * 3 * 16
    assert np.array_equal(F.load_matrix(tmp_path / "lambda=0.1_S"), M)
