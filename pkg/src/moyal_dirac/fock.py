"""Finite-mode self-dual CAR algebra over a J-closed space of Cauchy data.

The mode space is spanned by ``M`` orthonormal positive-frequency data
``phi_1..phi_M`` and their conjugates ``J phi_1..J phi_M`` (so it has
dimension ``2M`` and is J-invariant). On the ``2^M``-dimensional Fock space
with Jordan-Wigner annihilators ``a_i`` for ``phi_i`` the self-dual field is::

    B(chi) = a^*(P+ chi) + a(J P- chi)

which is linear, satisfies ``B(chi)^* = B(J chi)`` and
``{B(chi)^*, B(xi)} = <chi, xi>``. In the basis ``e = (phi, J phi)`` this
gives ``B(phi_i) = a_i^*`` and ``B(J phi_i) = a_i``.

The one-particle inner product on Cauchy data is the L^2 product; for data
``(R f)_0`` it equals ``kappa (f, h)_R``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

from .dirac import FreeDiracModel, causal_datum
from .lattice import SpacetimeSpinorField, SpinorField, l2_inner

MAX_MODES = 10


class ModeSpaceError(ValueError):
    pass


class ImplementerError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class FiniteModeSpace:
    """J-closed orthonormal family ``e = (phi_1..phi_M, J phi_1..J phi_M)``."""

    model: FreeDiracModel
    M: int
    basis: np.ndarray          # (2M, N, *spatial) Cauchy data
    gram: np.ndarray
    J_matrix: np.ndarray       # J acts on coordinates as J_matrix @ conj(c)
    Pplus_matrix: np.ndarray
    rejected: tuple = ()       # (seed index, norm) of seeds dropped as kernel vectors

    @property
    def dim(self) -> int:
        return 2 * self.M

    def _flat(self) -> np.ndarray:
        return self.basis.reshape(self.dim, -1)

    def coordinates(self, datum: SpinorField) -> tuple[np.ndarray, float]:
        """Coordinates of the orthogonal projection and the relative projection defect."""
        d = datum.components.ravel()
        E = self._flat()
        c = (E.conj() @ d) * self.model.lattice.cell_volume
        rest = d - c @ E
        nd = np.linalg.norm(d)
        return c, float(np.linalg.norm(rest) / nd) if nd else 0.0

    def datum(self, c: np.ndarray) -> SpinorField:
        return SpinorField(self.model.lattice, (np.asarray(c) @ self._flat()).reshape(self.basis.shape[1:]))

    def apply_J(self, c: np.ndarray) -> np.ndarray:
        return self.J_matrix @ np.conj(c)

    def j_defect(self) -> float:
        """``max |J e_k - e_{J k}|`` with J applied to the actual data."""
        Jb = self.model.rep.apply_J(self.basis, axis=1).reshape(self.dim, -1)
        return float(np.abs(Jb - (self.J_matrix.T @ self._flat())).max())

    def pplus_defect(self) -> float:
        """``|| P+ e_k - (Pplus_matrix e)_k ||`` on the data: how well P+ restricts."""
        arr = self.model.project_array(self.basis, +1).reshape(self.dim, -1)
        return float(np.abs(arr - self.Pplus_matrix.T @ self._flat()).max())

    def compress(self, apply) -> tuple[np.ndarray, float]:
        """Matrix of ``P_M A P_M`` for a map ``A`` on data batches ``(B, N, *spatial)``,
        and the relative compression defect ``max_k ||(1 - P_M) A e_k|| / ||A e_k||``."""
        E = self._flat()
        out = np.asarray(apply(self.basis)).reshape(self.dim, -1)
        A = (E.conj() @ out.T) * self.model.lattice.cell_volume
        rest = out - A.T @ E
        norms = np.linalg.norm(out, axis=1)
        ok = norms > 0
        defect = float((np.linalg.norm(rest, axis=1)[ok] / norms[ok]).max()) if ok.any() else 0.0
        return A, defect


def build_mode_space(model: FreeDiracModel, seeds, M: int | None = None,
                     kernel_tol: float = 1e-8) -> FiniteModeSpace:
    """Modes from test spinors: data ``(R f)_0`` split as ``P+ d`` and ``J P- d``.

    Seeds whose data norm (the square root of ``kappa (f, f)_R``) is below
    ``kernel_tol`` relative to the largest seed are rejected as kernel vectors.
    """
    data, rejected = [], []
    norms = []
    for f in seeds:
        d = causal_datum(model, f) if isinstance(f, SpacetimeSpinorField) else f
        data.append(d)
        norms.append(d.norm())
    scale = max(norms) if norms else 0.0
    cands = []
    for i, (d, n) in enumerate(zip(data, norms)):
        if scale == 0 or n < kernel_tol * max(scale, 1.0):
            rejected.append((i, float(n)))
            continue
        cands.append(model.project_array(d.components, +1))
        cands.append(model.rep.apply_J(model.project_array(d.components, -1), axis=0))
    dV = model.lattice.cell_volume
    phis = []
    for c in cands:
        v = c.ravel().astype(complex)
        for _ in range(2):
            for p in phis:
                v = v - (np.vdot(p, v) * dV) * p
        n = np.sqrt(np.vdot(v, v).real * dV)
        ref = np.sqrt(np.vdot(c.ravel(), c.ravel()).real * dV)
        if ref == 0 or n < 1e-8 * ref:
            continue
        phis.append(v / n)
        if M is not None and len(phis) == M:
            break
    if M is None:
        M = len(phis)
    if len(phis) < M or M < 1:
        raise ModeSpaceError(f"seeds span only {len(phis)} independent positive-frequency modes, need {M}")
    if M > MAX_MODES:
        raise ModeSpaceError(f"M = {M} exceeds the limit of {MAX_MODES} modes")
    shape = (model.N,) + model.lattice.shape
    P = np.array(phis).reshape((M,) + shape)
    JP = model.rep.apply_J(P, axis=1)
    basis = np.concatenate([P, JP])
    E = basis.reshape(2 * M, -1)
    gram = (E.conj() @ E.T) * dV
    I = np.eye(M)
    Z = np.zeros((M, M))
    J = np.block([[Z, I], [I, Z]])
    Pp = np.block([[I, Z], [Z, Z]])
    return FiniteModeSpace(model, M, basis, gram, J, Pp, tuple(rejected))


@dataclass(frozen=True, eq=False)
class FockRep:
    M: int
    annihilators: tuple        # a_1..a_M
    B_matrices: tuple          # B(e_k), k = 1..2M
    vacuum: np.ndarray
    occupations: np.ndarray    # (2^M, M) occupation numbers per basis state

    @property
    def dim(self) -> int:
        return 2 ** self.M

    def field(self, c: np.ndarray) -> np.ndarray:
        """``B(chi)`` for coordinates ``c``."""
        return np.tensordot(np.asarray(c), np.array(self.B_matrices), axes=1)


def build_fock(space: FiniteModeSpace) -> FockRep:
    """Jordan-Wigner construction on ``(C^2)^{tensor M}``; state index bits are occupations."""
    M = space.M
    low = np.array([[0, 1], [0, 0]], dtype=complex)  # |0><1|: annihilates occupation 1
    Z = np.diag([1.0, -1.0]).astype(complex)
    I2 = np.eye(2, dtype=complex)
    ann = []
    for i in range(M):
        ops = [Z] * i + [low] + [I2] * (M - i - 1)
        a = ops[0]
        for o in ops[1:]:
            a = np.kron(a, o)
        ann.append(a)
    B = tuple(a.conj().T for a in ann) + tuple(ann)
    vac = np.zeros(2 ** M, dtype=complex)
    vac[0] = 1.0
    occ = np.array([[(s >> (M - 1 - i)) & 1 for i in range(M)] for s in range(2 ** M)])
    return FockRep(M, tuple(ann), B, vac, occ)


@dataclass(frozen=True)
class CARReport:
    car: float
    self_duality: float
    vacuum: float


def car_defects(fock: FockRep, space: FiniteModeSpace) -> CARReport:
    I = np.eye(fock.dim)
    G = space.gram
    car = 0.0
    for j, Bj in enumerate(fock.B_matrices):
        for k, Bk in enumerate(fock.B_matrices):
            anti = Bj.conj().T @ Bk + Bk @ Bj.conj().T
            car = max(car, np.abs(anti - G[j, k] * I).max())
    sd = 0.0
    n = space.dim
    for k in range(n):
        e = np.zeros(n, dtype=complex)
        e[k] = 1
        sd = max(sd, np.abs(fock.field(space.apply_J(e)) - fock.field(e).conj().T).max())
    vac = max(np.linalg.norm(a @ fock.vacuum) for a in fock.annihilators)
    return CARReport(float(car), float(sd), float(vac))


def field_operator(fock: FockRep, space: FiniteModeSpace, f, budget: float = 1e-6,
                   strict: bool = True) -> tuple[np.ndarray, float]:
    """``psi(f) = B((R f)_0)`` projected onto the mode space, with the projection defect.

    ``f`` may also be a Cauchy datum directly. A kernel-like ``f`` (vanishing
    datum) gives the zero operator with defect 0.
    """
    d = causal_datum(space.model, f) if isinstance(f, SpacetimeSpinorField) else f
    c, defect = space.coordinates(d)
    if strict and defect > budget:
        raise ModeSpaceError(f"projection defect {defect:.2e} exceeds budget {budget:.1e}")
    return fock.field(c), defect


def j_symmetrize(space: FiniteModeSpace, A: np.ndarray) -> tuple[np.ndarray, float]:
    """``(A + J A J) / 2`` in coordinates and the defect ``||A J - J A||``."""
    P = space.J_matrix
    JAJ = P @ np.conj(A) @ P
    return 0.5 * (A + JAJ), float(np.abs(A - JAJ).max())


def polar_unitary(A: np.ndarray) -> tuple[np.ndarray, float]:
    """Nearest unitary (polar factor) and the defect ``||A^* A - 1||``."""
    U, _ = scipy.linalg.polar(A)
    return U, float(np.abs(A.conj().T @ A - np.eye(len(A))).max())


@dataclass(frozen=True)
class Implementer:
    S: np.ndarray
    null_dim: int
    intertwining: float
    unitarity: float
    smallest: tuple      # two smallest singular values of the intertwining system


def implement_bogoliubov(fock: FockRep, space: FiniteModeSpace, s: np.ndarray,
                         tol: float = 1e-7) -> Implementer:
    """Solve ``S B(e_k) = B(s e_k) S`` for ``S`` (null space of the stacked system).

    ``s`` acts on coordinates and must be unitary and J-compatible. The
    result is scaled to unit Frobenius norm per dimension and its phase is
    fixed by a positive vacuum overlap when that overlap is non-negligible.
    """
    n = space.dim
    if np.abs(s.conj().T @ s - np.eye(n)).max() > 1e-8:
        raise ImplementerError("one-particle operator is not unitary on the mode space")
    D = fock.dim
    I = np.eye(D)
    H = np.zeros((D * D, D * D), dtype=complex)
    for k in range(n):
        Bk = fock.B_matrices[k]
        Bs = fock.field(s[:, k])
        K = np.kron(I, Bk.T) - np.kron(Bs, I)  # row-major vec of S Bk - Bs S
        H += K.conj().T @ K
    w, V = np.linalg.eigh(H)
    sv = np.sqrt(np.clip(w[:2], 0, None))
    scale = np.sqrt(max(w[-1], 1.0))
    null_dim = int(np.sum(np.sqrt(np.clip(w, 0, None)) < 1e-6 * scale))
    S = V[:, 0].reshape(D, D) * np.sqrt(D)
    ov = fock.vacuum.conj() @ S @ fock.vacuum
    if abs(ov) > 1e-12:
        S = S * (abs(ov) / ov)
    inter = max(np.abs(S @ fock.B_matrices[k] - fock.field(s[:, k]) @ S).max() for k in range(n))
    unit = float(np.abs(S.conj().T @ S - I).max())
    if inter > tol or unit > tol:
        raise ImplementerError(f"no implementer within tolerance (intertwining {inter:.2e}, "
                               f"unitarity {unit:.2e})")
    return Implementer(S, null_dim, float(inter), unit, tuple(float(x) for x in sv))


def phase_equal(A: np.ndarray, B: np.ndarray) -> float:
    """``min_phase ||A - e^{i phi} B||_max``."""
    z = np.vdot(B, A)
    ph = z / abs(z) if abs(z) else 1.0
    return float(np.abs(A - ph * B).max())


@dataclass(frozen=True)
class Generator:
    Y: np.ndarray
    anti_hermitian_defect: float
    j_defect: float
    self_adjoint: float
    commutator: float


def quadratic_generator(fock: FockRep, space: FiniteModeSpace, A: np.ndarray,
                        tol: float = 1e-6) -> Generator:
    """Normal-ordered ``Y`` with ``i [Y, B(chi)] = B(A chi)``.

    ``A`` is projected to its anti-Hermitian J-compatible part first (defects
    reported); then ``Y = (i/2) sum_{l,m} A_{ml} B_l^* B_m - <Y>_vac``.
    """
    n = space.dim
    A = np.asarray(A, dtype=complex)
    ah = float(np.abs(A + A.conj().T).max())
    A = 0.5 * (A - A.conj().T)
    A, jd = j_symmetrize(space, A)
    if ah > tol * max(1.0, np.abs(A).max()) or jd > tol * max(1.0, np.abs(A).max()):
        raise ModeSpaceError(f"generator is not J-compatible and anti-Hermitian "
                             f"(defects {ah:.2e}, {jd:.2e})")
    Bs = np.array(fock.B_matrices)
    BsH = np.conj(np.swapaxes(Bs, 1, 2))
    Y = 0.5j * np.einsum("ml,lab,mbc->ac", A, BsH, Bs)
    Y = Y - (fock.vacuum.conj() @ Y @ fock.vacuum) * np.eye(fock.dim)
    sa = float(np.abs(Y - Y.conj().T).max())
    comm = 0.0
    for k in range(n):
        lhs = 1j * (Y @ Bs[k] - Bs[k] @ Y)
        comm = max(comm, np.abs(lhs - fock.field(A[:, k])).max())
    return Generator(Y, ah, jd, sa, float(comm))


def export_matrix(path, matrix: np.ndarray) -> tuple[Path, Path]:
    """Write ``<path>.bin`` (row-major little-endian complex128) and ``<path>.json``."""
    path = Path(path)
    arr = np.ascontiguousarray(matrix, dtype="<c16")
    binp = path.with_name(path.name + ".bin")
    meta = path.with_name(path.name + ".json")
    binp.write_bytes(arr.tobytes(order="C"))
    meta.write_text(json.dumps({"shape": list(arr.shape), "dtype": "complex128",
                                "byteorder": "little", "order": "C"}, indent=2))
    return binp, meta


def load_matrix(path) -> np.ndarray:
    path = Path(path)
    meta = json.loads(path.with_name(path.name + ".json").read_text())
    data = np.frombuffer(path.with_name(path.name + ".bin").read_bytes(), dtype="<c16")
    return data.reshape(meta["shape"]).astype(complex)
