"""Free Dirac kernel: gamma matrices, H0, free flow, fundamental solutions.

Conventions (see also :func:`conventions`):

* signature ``eta = diag(+, -, ..., -)``; Majorana representations, so every
  gamma matrix is purely imaginary, ``gamma^0`` is Hermitian and squares to
  one, and charge conjugation is plain complex conjugation (``C = 1``,
  ``J^2 = +1``);
* ``D = i gamma^mu d_mu + m`` and ``H0 = i gamma^0 gamma^k d_k + gamma^0 m``,
  so ``D = gamma^0 (i d_t + H0)`` and free solutions obey
  ``i d_t chi + H0 chi = 0``, i.e. ``chi_t = exp(i t H0) chi_0``;
* retarded/advanced solutions of ``D chi = f``::

      R_+ f (t) = -i int_{-inf}^t exp(i (t-s) H0) gamma^0 f(s) ds
      R_- f (t) = +i int_t^{inf}  exp(i (t-s) H0) gamma^0 f(s) ds

  and ``R = R_+ - R_-``;
* ``(f, h)_R = (f, gamma^0 R h) = -i <(R f)_0, (R h)_0>``; the phase that
  makes it positive is ``kappa = i``.

The time integrals are evaluated per momentum mode and per eigenvalue
branch in closed form against the trigonometric interpolant of the sampled
source (a Filon-type rule): the free phase ``exp(-i E s)`` is integrated
exactly, so the result is accurate to the spectral resolution of the source
in time rather than to ``O(dt^2)``.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import kernels
from .lattice import (Lattice, LatticeError, SpacetimeSpinorField, SpinorField,
                      spacetime_inner)

SOLUTION_PHASE = 1j
"""kappa: ``kappa * (f, f)_R >= 0``."""

DERIVATIVE_PHASE = 1.0
"""kappa': ``d/dlambda s_lambda v = kappa' (R P[c] u_v)_0`` at lambda = 0."""


class CliffordError(ValueError):
    pass


class SupportError(ValueError):
    """Source not decayed at the edges of the time window."""


_s1 = np.array([[0, 1], [1, 0]], dtype=complex)
_s2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
_s3 = np.array([[1, 0], [0, -1]], dtype=complex)
_z2 = np.zeros((2, 2), dtype=complex)

_MAJORANA_4 = (
    np.block([[_z2, _s2], [_s2, _z2]]),
    np.block([[1j * _s3, _z2], [_z2, 1j * _s3]]),
    np.block([[_z2, -_s2], [_s2, _z2]]),
    np.block([[-1j * _s1, _z2], [_z2, -1j * _s1]]),
)
_MAJORANA_2 = (_s2.copy(), 1j * _s1)


@dataclass(frozen=True)
class CliffordRep:
    n: int
    N: int
    gammas: tuple
    beta: np.ndarray
    conj_matrix: np.ndarray
    j_sign: int

    @property
    def metric(self) -> np.ndarray:
        return np.diag([1.0] + [-1.0] * (self.n - 1))

    def anticommutator_defect(self) -> float:
        eta = self.metric
        I = np.eye(self.N)
        return max(np.abs(gm @ gn + gn @ gm - 2 * eta[m, n] * I).max()
                   for m, gm in enumerate(self.gammas) for n, gn in enumerate(self.gammas))

    def apply_J(self, arr: np.ndarray, axis: int = 0) -> np.ndarray:
        """``J f = C conj(f)`` acting on the spinor index ``axis``."""
        out = np.conj(arr)
        if np.array_equal(self.conj_matrix, np.eye(self.N)):
            return out
        return np.moveaxis(np.tensordot(self.conj_matrix, np.moveaxis(out, axis, 0), axes=1), 0, axis)


def build_clifford(n: int) -> CliffordRep:
    """Majorana representation for spacetime dimension ``n`` in {2, 3, 4}."""
    if n == 2:
        gammas = _MAJORANA_2
        N = 2
    elif n in (3, 4):
        gammas = _MAJORANA_4[:n]
        N = 4
    else:
        raise CliffordError(f"unsupported spacetime dimension {n}")
    gammas = tuple(g.copy() for g in gammas)
    for g in gammas:
        g.setflags(write=False)
    return CliffordRep(n=n, N=N, gammas=gammas, beta=gammas[0], conj_matrix=np.eye(N),
                       j_sign=+1)


def _literal(z: complex) -> str:
    re, im = int(round(z.real)), int(round(z.imag))
    if im == 0:
        return str(re)
    if re == 0:
        return {1: "i", -1: "-i"}.get(im, f"{im}i")
    return f"{re}{im:+d}i"


def conventions() -> dict:
    """Machine-readable conventions document."""
    reps = {}
    for n in (2, 3, 4):
        rep = build_clifford(n)
        reps[str(n)] = {
            "N": rep.N,
            "gammas": [[[_literal(z) for z in row] for row in g] for g in rep.gammas],
            "beta": "gamma^0",
            "charge_conjugation": {"J": "C * conj", "C": "identity", "J_squared": rep.j_sign},
        }
    return {
        "signature": "diag(+,-,...,-)",
        "dirac_operator": "D = i gamma^mu d_mu + m",
        "hamiltonian": "H0 = i gamma^0 gamma^k d_k + gamma^0 m; i d_t chi + H0 chi = 0",
        "free_flow": "chi_t = exp(+i t H0) chi_0",
        "fundamental_solutions": {
            "retarded": "R_+ f(t) = -i int_{s<t} exp(i(t-s)H0) gamma^0 f(s) ds",
            "advanced": "R_- f(t) = +i int_{s>t} exp(i(t-s)H0) gamma^0 f(s) ds",
            "causal": "R = R_+ - R_-",
        },
        "positive_frequency": "spectral projection of H0 onto eigenvalue +sqrt(k^2+m^2)",
        "solution_form_phase_kappa": "i",
        "scattering_orientation": "s = U0(0,t-) U(t-,t+) U0(t+,0): free forward to t+, "
                                  "interacting back to t-, free forward to 0",
        "derivative_constant_kappa_prime": "+1",
        "spectral_normalization": "unitary DFT (norm='ortho'); momenta 2 pi fftfreq(n, L/n)",
        "mass_default": 1.0,
        "moyal_phase": "(f * h)^(k) from f^(k - p) h^(p) exp(-i/2 k.Theta p)",
        "spatial_derivative_symbol": "i k with the Nyquist momentum set to 0 on even grids",
        "neumann_gate": "q = 1.1 * power-iteration estimate of ||V R||; series used only if q < 0.9",
        "slice_turnaround": "T = tau / 1.25",
        "representations": reps,
    }


def conventions_hash() -> str:
    blob = json.dumps(conventions(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def centered_difference_weights(order: int) -> np.ndarray:
    """Weights ``c_j`` (j = 1..order/2) of the centered first-derivative stencil
    ``f'(0) ~ sum_j c_j (f(j h) - f(-j h)) / (2 h)``."""
    if order < 2 or order % 2:
        raise ValueError("order must be an even integer >= 2")
    m = order // 2
    from math import factorial
    return np.array([2 * (-1) ** (j + 1) * factorial(m) ** 2 / (j * factorial(m - j) * factorial(m + j))
                     for j in range(1, m + 1)])


@dataclass(frozen=True, eq=False)
class FreeDiracModel:
    rep: CliffordRep
    mass: float
    lattice: Lattice
    _tables: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.lattice.dim != self.rep.n - 1:
            raise LatticeError(f"spatial lattice dim {self.lattice.dim} does not match n={self.rep.n}")
        if self.lattice.time_axis is not None:
            raise LatticeError("the free model needs a purely spatial lattice")
        if not self.mass or not np.isfinite(self.mass):
            raise ValueError("mass must be a nonzero real number")

    @property
    def N(self) -> int:
        return self.rep.N

    @cached_property
    def derivative_momenta(self) -> list[np.ndarray]:
        """Momenta of the spectral first derivative: the Nyquist mode is zeroed on
        even grids, so that ``d/dx`` maps real fields to real fields and
        ``J H0 J = -H0`` holds exactly on the lattice."""
        out = []
        for a, k in enumerate(self.lattice.momenta()):
            k = np.array(k, dtype=float)
            n = self.lattice.points[a]
            if n % 2 == 0:
                sl = tuple(slice(n // 2, n // 2 + 1) if b == a else slice(None) for b in range(k.ndim))
                k[sl] = 0.0
            out.append(k)
        return out

    @cached_property
    def symbols(self) -> np.ndarray:
        """``H0(k)`` per mode, shape ``(G, N, N)`` in row-major mode order."""
        g0 = self.rep.gammas[0]
        H = np.broadcast_to(self.mass * g0, (self.lattice.size, self.N, self.N)).copy()
        for j, kj in enumerate(self.derivative_momenta):
            kflat = np.broadcast_to(kj, self.lattice.shape).ravel()
            alpha = g0 @ self.rep.gammas[j + 1]
            H -= kflat[:, None, None] * alpha[None]
        return H

    @cached_property
    def _eig(self):
        w, U = np.linalg.eigh(self.symbols)
        return w, U

    @property
    def eigenvalues(self) -> np.ndarray:
        return self._eig[0]

    @property
    def eigenvectors(self) -> np.ndarray:
        return self._eig[1]

    @cached_property
    def energies(self) -> np.ndarray:
        k2 = sum(np.broadcast_to(k, self.lattice.shape) ** 2 for k in self.derivative_momenta)
        return np.sqrt(k2.ravel() + self.mass ** 2)

    @cached_property
    def positive_projector(self) -> np.ndarray:
        w, U = self._eig
        pos = (w > 0).astype(float)
        return np.einsum("gin,gn,gjn->gij", U, pos, U.conj())

    @cached_property
    def _UH(self) -> np.ndarray:
        return np.ascontiguousarray(np.conj(np.swapaxes(self.eigenvectors, 1, 2)))

    @cached_property
    def _UH_beta(self) -> np.ndarray:
        return np.ascontiguousarray(self._UH @ self.rep.beta)

    # -- array-level helpers: arrays are (..., N, *spatial) ------------------
    def _modes(self, arr: np.ndarray):
        d = self.lattice.dim
        batch = arr.shape[:-(d + 1)]
        a = np.fft.fftn(arr, axes=tuple(range(-d, 0)), norm="ortho")
        return a.reshape((-1, self.N, self.lattice.size)), batch

    def _unmodes(self, coefs: np.ndarray, batch) -> np.ndarray:
        d = self.lattice.dim
        a = coefs.reshape(batch + (self.N,) + self.lattice.shape)
        return np.fft.ifftn(a, axes=tuple(range(-d, 0)), norm="ortho")

    def to_eigenbasis(self, arr, with_beta: bool = False):
        """Mode coefficients in the per-mode eigenbasis of H0: ``(B, N, G)``."""
        c, batch = self._modes(np.asarray(arr, dtype=complex))
        mats = self._UH_beta if with_beta else self._UH
        return kernels.apply_mode_matrices(mats, c), batch

    def from_eigenbasis(self, coefs, batch) -> np.ndarray:
        return self._unmodes(kernels.apply_mode_matrices(self.eigenvectors, coefs), batch)

    def h0_array(self, arr) -> np.ndarray:
        c, batch = self._modes(np.asarray(arr, dtype=complex))
        return self._unmodes(kernels.apply_mode_matrices(self.symbols, c), batch)

    def propagate_array(self, arr, t) -> np.ndarray:
        """``exp(i t H0)`` on an array ``(..., N, *spatial)``."""
        c, batch = self.to_eigenbasis(arr)
        c = c * np.exp(1j * t * self.eigenvalues.T)[None]
        return self.from_eigenbasis(c, batch)

    def project_array(self, arr, sign: int = +1) -> np.ndarray:
        c, batch = self.to_eigenbasis(arr)
        mask = (self.eigenvalues.T > 0) if sign > 0 else (self.eigenvalues.T < 0)
        return self.from_eigenbasis(c * mask[None], batch)


def make_free_model(n: int, lattice: Lattice, mass: float = 1.0) -> FreeDiracModel:
    return FreeDiracModel(build_clifford(n), float(mass), lattice)


def _check_spinor(model: FreeDiracModel, v: SpinorField):
    if v.lattice != model.lattice or v.N != model.N:
        raise LatticeError("spinor field does not match the model")


def apply_h0(model: FreeDiracModel, v: SpinorField) -> SpinorField:
    _check_spinor(model, v)
    return SpinorField(v.lattice, model.h0_array(v.components))


def free_propagate(model: FreeDiracModel, v: SpinorField, t: float) -> SpinorField:
    """``exp(i t H0) v``: the free solution with datum ``v`` at time 0, read at ``t``."""
    _check_spinor(model, v)
    if t == 0:
        return v
    return SpinorField(v.lattice, model.propagate_array(v.components, t))


def positive_frequency_project(model: FreeDiracModel, v: SpinorField, sign: int = +1) -> SpinorField:
    _check_spinor(model, v)
    return SpinorField(v.lattice, model.project_array(v.components, sign))


def charge_conjugate(model: FreeDiracModel, v: SpinorField) -> SpinorField:
    return SpinorField(v.lattice, model.rep.apply_J(v.components, axis=0))


def free_solution(model: FreeDiracModel, v: SpinorField, times) -> SpacetimeSpinorField:
    """Samples of ``t -> exp(i t H0) v`` on a time grid."""
    _check_spinor(model, v)
    times = np.asarray(times, dtype=float)
    c, _ = model.to_eigenbasis(v.components)
    ph = np.exp(1j * times[:, None, None] * model.eigenvalues.T[None])
    data = model.from_eigenbasis(ph * c, (len(times),))
    return SpacetimeSpinorField(times, model.lattice, data)


# -- fundamental solutions --------------------------------------------------

def check_window(F: SpacetimeSpinorField, tol: float = 1e-10, edge: int = 2):
    peak = np.abs(F.data).max()
    if peak == 0:
        return
    e = max(np.abs(F.data[:edge]).max(), np.abs(F.data[-edge:]).max())
    if e > tol * peak:
        raise SupportError(f"source reaches the time-window boundary (edge/peak = {e / peak:.2e})")


class _Duhamel:
    """Closed-form time integrals ``Phi(t) = int_{t0}^t exp(-i e s) g(s) ds``.

    Everything is carried with the common phase ``exp(i e t0)`` stripped;
    ``t'`` is measured from the first sample.
    """

    def __init__(self, model: FreeDiracModel, F: SpacetimeSpinorField):
        self.model = model
        self.t0 = float(F.times[0])
        self.Nt = len(F.times)
        self.dt = F.dt
        self.period = self.Nt * self.dt
        c, _ = model.to_eigenbasis(F.data, with_beta=True)  # (Nt, N, G)
        Fw = np.fft.fft(c, axis=0) / self.Nt
        w = 2 * np.pi * np.fft.fftfreq(self.Nt, d=self.dt)[:, None, None]
        e = model.eigenvalues.T[None]  # (1, N, G)
        dlt = w - e
        small = np.abs(dlt) * self.period < 1e-9
        with np.errstate(divide="ignore", invalid="ignore"):
            self.Gw = np.where(small, 0.0, Fw / (1j * np.where(small, 1.0, dlt)))
        self.S = np.where(small, Fw, 0.0).sum(axis=0)  # resonant part
        self.A0 = self.Gw.sum(axis=0)
        self.w = w[:, 0, 0]
        self.e = e[0]
        self.Phi_tot = (np.exp(-1j * self.e * self.period) - 1) * self.A0 + self.period * self.S

    def A(self, tp: np.ndarray, on_grid: bool) -> np.ndarray:
        if on_grid:
            return np.fft.ifft(self.Gw, axis=0) * self.Nt
        ph = np.exp(1j * np.outer(tp, self.w))  # (T, Nt)
        return np.tensordot(ph, self.Gw, axes=(1, 0))

    def evaluate(self, which: str, times=None) -> tuple[np.ndarray, np.ndarray]:
        on_grid = times is None
        if on_grid:
            tp = self.dt * np.arange(self.Nt)
        else:
            tp = np.asarray(times, dtype=float) - self.t0
        rot = np.exp(1j * tp[:, None, None] * self.e[None])
        if which == "causal":
            out = -1j * rot * self.Phi_tot[None]
        else:
            Phi = self.A(tp, on_grid) / rot - self.A0[None] + tp[:, None, None] * self.S[None]
            if which == "retarded":
                out = -1j * rot * Phi
            elif which == "advanced":
                out = 1j * rot * (self.Phi_tot[None] - Phi)
            else:
                raise ValueError(f"unknown fundamental solution {which!r}")
        return out, tp + self.t0


def fundamental_solution(model: FreeDiracModel, F: SpacetimeSpinorField, which: str = "retarded",
                         at_times=None, window_tol: float = 1e-10) -> SpacetimeSpinorField:
    """``R_+ F`` (``which="retarded"``), ``R_- F`` (``"advanced"``) or ``R F`` (``"causal"``).

    ``at_times`` evaluates the result at arbitrary times instead of on the
    source grid and returns a list of :class:`SpinorField` slices.
    """
    if F.lattice != model.lattice or F.N != model.N:
        raise LatticeError("source does not match the model")
    check_window(F, window_tol)
    duh = _Duhamel(model, F)
    coefs, times = duh.evaluate(which, at_times)
    data = model.from_eigenbasis(coefs, (len(times),))
    if at_times is None:
        return F.with_data(data)
    return [SpinorField(model.lattice, d) for d in data]


def causal_propagator(model: FreeDiracModel, F: SpacetimeSpinorField) -> SpacetimeSpinorField:
    return fundamental_solution(model, F, "causal")


def causal_datum(model: FreeDiracModel, F: SpacetimeSpinorField, window_tol: float = 1e-10) -> SpinorField:
    """Cauchy datum of ``R F`` at ``t = 0``."""
    if F.lattice != model.lattice or F.N != model.N:
        raise LatticeError("source does not match the model")
    check_window(F, window_tol)
    duh = _Duhamel(model, F)
    coefs, _ = duh.evaluate("causal", np.zeros(1))
    return SpinorField(model.lattice, model.from_eigenbasis(coefs, (1,))[0])


def apply_dirac(model: FreeDiracModel, F: SpacetimeSpinorField, method: str = "centered",
                order: int = 8) -> SpacetimeSpinorField:
    """Discrete ``D F = gamma^0 (i d_t F + H0 F)``.

    ``method="centered"``: centered stencil of the given order with periodic
    wrap in time -- only the interior ``order/2`` samples from each end are
    meaningful unless ``F`` vanishes there. ``method="spectral"``: periodic
    spectral time derivative, exact for fields supported inside the window.
    """
    if F.lattice != model.lattice or F.N != model.N:
        raise LatticeError("field does not match the model")
    x = F.data
    if method == "centered":
        dx = np.zeros_like(x)
        for j, cj in enumerate(centered_difference_weights(order), start=1):
            dx += cj * (np.roll(x, -j, axis=0) - np.roll(x, j, axis=0))
        dx /= 2 * F.dt
    elif method == "spectral":
        w = 2 * np.pi * np.fft.fftfreq(len(F.times), d=F.dt)
        if len(w) % 2 == 0:
            w[len(w) // 2] = 0.0
        dx = np.fft.ifft(1j * w.reshape((-1,) + (1,) * (x.ndim - 1)) * np.fft.fft(x, axis=0), axis=0)
    else:
        raise ValueError(f"unknown method {method!r}")
    y = 1j * dx + model.h0_array(x)
    return F.with_data(np.tensordot(model.rep.beta, y, axes=([1], [1])).swapaxes(0, 1))


def spacetime_pairing(model: FreeDiracModel, f: SpacetimeSpinorField, h: SpacetimeSpinorField) -> complex:
    """``sum_{t,x} conj(f) gamma^0 h  dt dV``."""
    bh = np.tensordot(model.rep.beta, h.data, axes=([1], [1])).swapaxes(0, 1)
    return spacetime_inner(f, h.with_data(bh))


def solution_inner(model: FreeDiracModel, f: SpacetimeSpinorField, h: SpacetimeSpinorField) -> complex:
    """``(f, h)_R = (f, gamma^0 R h)``; ``SOLUTION_PHASE * (f, f)_R >= 0``."""
    return spacetime_pairing(model, f, causal_propagator(model, h))
