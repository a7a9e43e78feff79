"""Interacting evolution and the one-particle scattering operator for
commutative-time potentials.

The interacting flow solves ``i d_t chi + (H0 + V(t)) chi = 0``, i.e.
``chi(t + dt) ~ exp(i dt (H0 + V)) chi(t)``. It is integrated by Strang
splitting with exact free half-steps and a midpoint potential step. The
potential exponential is exact (eigendecomposition of the Hermitian spatial
operator) or, optionally, a truncated Taylor series. Outside the time
support of ``a`` the flow is exactly free and is applied in one step.

The scattering operator uses the orientation: free flow forward to ``t+``,
interacting flow back to ``t-``, free flow forward to 0::

    s = exp(-i t- H0) U(t-, t+) exp(i t+ H0)

so ``s = 1`` at zero coupling and, to first order,
``(s - 1) v / lam -> (R P[c] u_v)(0)`` with ``u_v`` the free solution
through ``v``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dirac import DERIVATIVE_PHASE, FreeDiracModel, causal_datum, free_solution
from .lattice import LatticeError, SpacetimeSpinorField, SpinorField
from .potentials import HT_KINDS, PotentialError, PotentialSpec, coupling_action

SERIES_TOL = 1e-14
_YOSHIDA = (1 / (2 - 2 ** (1 / 3)), -2 ** (1 / 3) / (2 - 2 ** (1 / 3)), 1 / (2 - 2 ** (1 / 3)))


class MarginError(ValueError):
    pass


@dataclass(frozen=True)
class EvolutionReport:
    norm_drift: float
    steps: int
    step_size: float
    method_order: int
    max_series_terms: int = 0


class _Stepper:
    """Split-step integrator over arrays ``(B, N, *spatial)``."""

    def __init__(self, model: FreeDiracModel, spec: PotentialSpec, order: int, exp_method: str):
        if spec.kind not in HT_KINDS:
            raise PotentialError(f"{spec.kind} is not a commutative-time kind")
        if spec.ctx.lattice != model.lattice:
            raise LatticeError("potential and model lattices differ")
        if order not in (2, 4):
            raise ValueError("order must be 2 or 4")
        if exp_method not in ("eigh", "series"):
            raise ValueError("exp_method must be 'eigh' or 'series'")
        self.exp_method = exp_method
        if exp_method == "eigh":
            self.kw, self.KW = spec.spatial_eig
            s_beta, self.Q = np.linalg.eigh(model.rep.beta)
            self.s_beta = s_beta.real
        self.model = model
        self.spec = spec
        self.order = order
        self.beta = model.rep.beta
        self.max_terms = 0

    def _exp_potential(self, x: np.ndarray, t: float, dt: float) -> np.ndarray:
        theta = dt * self.spec.lam * float(self.spec.time_factor(t))
        if theta == 0:
            return x
        if self.exp_method == "eigh":
            return self._exp_eigh(x, theta)
        return self._exp_series(x, theta)

    def _exp_eigh(self, x: np.ndarray, theta: float) -> np.ndarray:
        """``exp(i theta gamma^0 K)`` from the eigendecompositions of ``K`` and ``gamma^0``."""
        shape = x.shape
        y = x.reshape(shape[:2] + (-1,))
        if self.KW is not None:
            y = y @ self.KW.conj()
        y = np.einsum("ji,bjg->big", self.Q.conj(), y)
        y = y * np.exp(1j * theta * self.s_beta[:, None] * self.kw[None, :])[None]
        y = np.einsum("ij,bjg->big", self.Q, y)
        if self.KW is not None:
            y = y @ self.KW.T
        return y.reshape(shape)

    def _exp_series(self, x: np.ndarray, theta: float) -> np.ndarray:
        out = x.copy()
        term = x
        ref = np.linalg.norm(x)
        k = 0
        while True:
            k += 1
            Kt = self.spec.apply_spatial(term)
            term = (1j * theta / k) * np.einsum("ij,bj...->bi...", self.beta, Kt)
            out += term
            if np.linalg.norm(term) <= SERIES_TOL * ref or k > 200:
                break
        self.max_terms = max(self.max_terms, k)
        return out

    def _strang(self, x, t0, dt, n):
        """``n`` Strang steps of size ``dt`` from ``t0``, merging adjacent free half-steps."""
        x = self.model.propagate_array(x, dt / 2)
        for j in range(n):
            x = self._exp_potential(x, t0 + (j + 0.5) * dt, dt)
            x = self.model.propagate_array(x, dt if j < n - 1 else dt / 2)
        return x

    def run(self, x, t0, t1, steps):
        dt = (t1 - t0) / steps
        if self.order == 2:
            return self._strang(x, t0, dt, steps)
        t = t0
        for _ in range(steps):
            for w in _YOSHIDA:
                x = self._strang(x, t, w * dt, 1)
                t += w * dt
        return x


def _evolve_array(model, spec, arr, t_from, t_to, steps, order, exp_method="eigh"):
    """Returns ``(array, report)``; ``steps`` counts steps across the potential support."""
    if t_to == t_from:
        return arr, EvolutionReport(0.0, 0, 0.0, order)
    lo, hi = spec.a.support
    sgn = 1.0 if t_to > t_from else -1.0
    a0, a1 = sorted((t_from, t_to))
    s0, s1 = max(lo, a0), min(hi, a1)
    if spec.lam == 0 or s1 <= s0:
        return model.propagate_array(arr, t_to - t_from), EvolutionReport(0.0, 0, 0.0, order)
    enter, leave = (s0, s1) if sgn > 0 else (s1, s0)
    stepper = _Stepper(model, spec, order, exp_method)
    x = model.propagate_array(arr, enter - t_from)
    x = stepper.run(x, enter, leave, steps)
    x = model.propagate_array(x, t_to - leave)
    n0 = np.linalg.norm(arr)
    drift = abs(np.linalg.norm(x) - n0) / n0 if n0 else 0.0
    return x, EvolutionReport(float(drift), steps, abs(leave - enter) / steps, order, stepper.max_terms)


def evolve_interacting(model: FreeDiracModel, spec: PotentialSpec, v: SpinorField,
                       t_from: float, t_to: float, steps: int = 512,
                       order: int = 2, exp_method: str = "eigh") -> tuple[SpinorField, EvolutionReport]:
    """``U(t_to, t_from) v`` for an HT potential.

    ``steps`` split-steps cover the part of ``[t_from, t_to]`` inside the
    support of ``a``; the remainder is exact free flow. ``exp_method``
    selects how the potential exponential is applied: exactly through the
    eigendecomposition of the spatial operator (``"eigh"``) or as a Taylor
    series summed until the increment drops below 1e-14 (``"series"``).
    """
    if v.lattice != model.lattice or v.N != model.N:
        raise LatticeError("spinor does not match the model")
    if steps < 1:
        raise ValueError("steps must be positive")
    out, rep = _evolve_array(model, spec, v.components[None], t_from, t_to, steps, order, exp_method)
    return SpinorField(v.lattice, out[0]), rep


@dataclass(frozen=True, eq=False)
class ScatteringOperator:
    model: FreeDiracModel
    spec: PotentialSpec
    t_minus: float
    t_plus: float
    steps: int = 512
    order: int = 2
    exp_method: str = "eigh"
    reports: list = field(default_factory=list, repr=False)

    def apply_array(self, arr: np.ndarray) -> np.ndarray:
        """Action on a batch ``(B, N, *spatial)``."""
        m = self.model
        x = m.propagate_array(arr, self.t_plus)
        x, rep = _evolve_array(m, self.spec, x, self.t_plus, self.t_minus, self.steps, self.order,
                                 self.exp_method)
        self.reports.append(rep)
        return m.propagate_array(x, -self.t_minus)

    def apply(self, v: SpinorField) -> SpinorField:
        if v.lattice != self.model.lattice or v.N != self.model.N:
            raise LatticeError("spinor does not match the model")
        return SpinorField(v.lattice, self.apply_array(v.components[None])[0])

    @property
    def dimension(self) -> int:
        return self.model.N * self.model.lattice.size

    def dense(self, batch: int = 256) -> np.ndarray:
        """Matrix on the flattened ``(N, *spatial)`` index; needs dimension <= 4096."""
        dim = self.dimension
        if dim > 4096:
            raise ValueError(f"dense materialization refused for dimension {dim}")
        shape = (self.model.N,) + self.model.lattice.shape
        cols = []
        for start in range(0, dim, batch):
            stop = min(dim, start + batch)
            e = np.zeros((stop - start, dim), dtype=complex)
            e[np.arange(stop - start), np.arange(start, stop)] = 1.0
            cols.append(self.apply_array(e.reshape((-1,) + shape)).reshape(stop - start, dim))
        return np.concatenate(cols).T

    def unitarity_defect(self, n_probes: int = 50, seed: int = 0) -> float:
        """``max |<s x_i, s x_j> - <x_i, x_j>|`` over orthonormal random probes."""
        shape = (self.model.N,) + self.model.lattice.shape
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((n_probes, int(np.prod(shape)))) \
            + 1j * rng.standard_normal((n_probes, int(np.prod(shape))))
        Q, _ = np.linalg.qr(X.T)
        X = Q.T
        Y = self.apply_array(X.reshape((-1,) + shape)).reshape(n_probes, -1)
        gram = Y.conj() @ Y.T
        return float(np.abs(gram - np.eye(n_probes)).max())


def one_particle_s_matrix(model: FreeDiracModel, spec: PotentialSpec, t_minus: float,
                          t_plus: float, steps: int = 512, order: int = 2,
                          exp_method: str = "eigh") -> ScatteringOperator:
    """``s = exp(-i t- H0) U(t-, t+) exp(i t+ H0)``.

    Requires ``supp a`` inside ``(t-, t+)`` with a margin of one bump half-width.
    """
    lo, hi = spec.a.support
    margin = spec.a.half_width
    if not (t_minus <= lo - margin and t_plus >= hi + margin):
        raise MarginError(f"(t-, t+) = ({t_minus}, {t_plus}) must contain supp a = ({lo}, {hi}) "
                          f"with margin {margin}")
    return ScatteringOperator(model, spec, float(t_minus), float(t_plus), steps, order, exp_method)


def oracle_grid(spec: PotentialSpec, n_times: int = 256) -> np.ndarray:
    """Uniform time grid covering ``supp a`` with a half-width margin on each side."""
    lo, hi = spec.a.support
    m = spec.a.half_width
    return np.linspace(lo - m, hi + m, n_times, endpoint=False)


def born_oracle(model: FreeDiracModel, spec: PotentialSpec, v: SpinorField,
                n_times: int = 256) -> SpinorField:
    """``kappa' (R P[c] u_v)(0)`` with ``u_v`` the free solution through ``v``."""
    u = free_solution(model, v, oracle_grid(spec, n_times))
    F = coupling_action(spec, u)
    return causal_datum(model, F).scale(DERIVATIVE_PHASE)


@dataclass(frozen=True)
class BornReport:
    kind: str
    lambdas: tuple
    residuals: tuple
    slope: float
    oracle_norm: float
    norm_drift: float


def fit_slope(xs, ys) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float)), 1)[0])


def bogoliubov_derivative_check(model: FreeDiracModel, spec: PotentialSpec, f: SpacetimeSpinorField,
                                lambdas=(1e-1, 1e-2, 1e-3), t_minus: float | None = None,
                                t_plus: float | None = None, steps: int = 512, order: int = 2,
                                n_oracle: int = 256) -> BornReport:
    """Compare ``(s_lam - 1) v / lam`` with the Born oracle for ``v = (R f)(0)``."""
    v = causal_datum(model, f)
    lo, hi = spec.a.support
    m = spec.a.half_width
    t_minus = lo - m if t_minus is None else t_minus
    t_plus = hi + m if t_plus is None else t_plus
    O = born_oracle(model, spec.with_lambda(1.0), v, n_oracle)
    on = O.norm()
    res, drift = [], 0.0
    for lam in lambdas:
        S = one_particle_s_matrix(model, spec.with_lambda(lam), t_minus, t_plus, steps, order)
        Dl = (S.apply(v) - v).scale(1.0 / lam)
        res.append((Dl - O).norm() / on)
        drift = max(drift, max((r.norm_drift for r in S.reports), default=0.0))
    return BornReport(spec.kind, tuple(float(l) for l in lambdas), tuple(res),
                      fit_slope(lambdas, res), float(on), float(drift))
