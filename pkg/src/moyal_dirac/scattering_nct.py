"""Cut-off dynamics with a time-noncommutative potential.

On the slice ``-tau < t < tau`` the interacting operator is ``D + V`` with
``V = V_xi(lam)``. Interacting fundamental solutions come from the Neumann
series::

    R^{+-}_lam = R^{+-} sum_j (-V R^{+-})^j

which is only summed when the gate ``q = ||V R^{+-}|| < 0.9`` holds.

The scattering operator follows the sketch: free flow from 0 to ``T =
tau/1.25``, interacting flow back to ``-T`` and free flow forward to 0. The
interacting branch is the solution ``chi = u - R^-_lam (V u)`` of
``(D + V) chi = 0`` that agrees with the free solution ``u`` to the future
of ``supp xi``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dirac import (DERIVATIVE_PHASE, FreeDiracModel, apply_dirac, causal_datum, free_propagate,
                    free_solution, fundamental_solution)
from .lattice import (LatticeError, Lattice, ScalarField, SpacetimeSpinorField, SpinorField,
                      slice_times, spacetime_lattice)
from .moyal import ThetaMatrix, make_context
from .potentials import (CutoffSpec, PotentialSpec, apply_potential_nct, coupling_action,
                         norm_bound_report)

GATE = 0.9
TURNAROUND = 1.25


class GateError(RuntimeError):
    """Neumann series refused: estimated ``q >= gate``."""

    def __init__(self, q: float, gate: float = GATE):
        super().__init__(f"Neumann series divergence gate: q = {q:.4g} >= {gate}")
        self.q = q
        self.gate = gate


@dataclass(frozen=True, eq=False)
class SliceModel:
    tau: float
    times: np.ndarray
    model: FreeDiracModel
    cutoff: CutoffSpec
    turnaround: float
    snap_distance: float = 0.0  # turnaround and cut-off edges are evaluated off-grid exactly

    @property
    def lattice(self) -> Lattice:
        """Spacetime lattice of the slice (time axis first)."""
        return spacetime_lattice(len(self.times), self.tau, self.model.lattice)

    def field(self, data) -> SpacetimeSpinorField:
        return SpacetimeSpinorField(self.times, self.model.lattice, data)


def make_slice(model: FreeDiracModel, tau: float, n_times: int,
               turnaround_factor: float = TURNAROUND) -> SliceModel:
    if n_times < 128:
        raise LatticeError("slice needs at least 128 time samples")
    times = slice_times(n_times, tau)
    spacetime_lattice(n_times, tau, model.lattice)  # validates n_times
    return SliceModel(float(tau), times, model, CutoffSpec(float(tau)), tau / turnaround_factor)


def nct_spec(slc: SliceModel, lam: float, theta: ThetaMatrix | float,
             profile: Callable) -> PotentialSpec:
    """``nct_sandwich`` spec with ``c = profile(t, *x)`` sampled on the slice lattice."""
    lat = slc.lattice
    c = ScalarField(lat, np.asarray(profile(*lat.coords()), dtype=float))
    if not isinstance(theta, ThetaMatrix):
        theta = ThetaMatrix.symplectic_2d(theta) if lat.dim == 2 else None
    return PotentialSpec("nct_sandwich", float(lam), make_context(lat, theta), c=c, cutoff=slc.cutoff)


@dataclass(frozen=True, eq=False)
class NeumannSolution:
    slice: SliceModel
    spec: PotentialSpec
    which: str
    j_max: int
    q: float
    tail_norm: float


def make_neumann(slc: SliceModel, spec: PotentialSpec, which: str = "advanced", j_max: int = 8,
                 gate: float = GATE, iters: int = 40, safety: float = 1.1) -> NeumannSolution:
    if which not in ("advanced", "retarded"):
        raise ValueError(f"unknown fundamental solution {which!r}")
    if spec.cutoff.tau != slc.tau:
        raise LatticeError("potential cutoff does not belong to this slice")
    q = norm_bound_report(spec, slc.model, slc.times, which, iters, safety).bound
    if q >= gate:
        raise GateError(q, gate)
    tail = q ** (j_max + 1) / (1 - q)
    return NeumannSolution(slc, spec, which, int(j_max), float(q), float(tail))


def _series_source(ns: NeumannSolution, f: SpacetimeSpinorField) -> SpacetimeSpinorField:
    """``sum_{j <= j_max} (-V R)^j f``."""
    m = ns.slice.model
    g = f
    total = f
    for _ in range(ns.j_max):
        g = apply_potential_nct(ns.spec, fundamental_solution(m, g, ns.which)).scale(-1.0)
        total = total + g
    return total


def interacting_fundamental(ns: NeumannSolution, f: SpacetimeSpinorField,
                            at_times=None):
    """Truncated ``R^{+-}_lam f``; ``at_times`` returns slices at arbitrary times."""
    if not np.array_equal(f.times, ns.slice.times) or f.lattice != ns.slice.model.lattice:
        raise LatticeError("source does not live on the slice grid")
    return fundamental_solution(ns.slice.model, _series_source(ns, f), ns.which, at_times=at_times)


def defining_identity_residual(ns: NeumannSolution, f: SpacetimeSpinorField,
                               chi: SpacetimeSpinorField, order: int = 8) -> float:
    """``||(D + V) chi - f|| / ||f||`` on the stencil interior."""
    m = ns.slice.model
    r = apply_dirac(m, chi, "centered", order) + apply_potential_nct(ns.spec, chi) - f
    k = order // 2
    return float(np.linalg.norm(r.data[k:-k]) / np.linalg.norm(f.data[k:-k]))


def figure1_scattering(slc: SliceModel, spec: PotentialSpec, datum: SpinorField,
                       ns: NeumannSolution | None = None, j_max: int = 8) -> SpinorField:
    """Scattered datum ``s(tau, lam, xi) v``."""
    m = slc.model
    if spec.lam == 0:
        return datum
    if ns is None:
        ns = make_neumann(slc, spec, "advanced", j_max)
    T = slc.turnaround
    vT = free_propagate(m, datum, T)
    u = free_solution(m, free_propagate(m, vT, -T), slc.times)
    Vu = apply_potential_nct(spec, u)
    corr = interacting_fundamental(ns, Vu, at_times=np.array([-T]))[0]
    chi_minus = free_propagate(m, vT, -2 * T) - corr
    return free_propagate(m, chi_minus, T)


def derivation_oracle(slc: SliceModel, spec: PotentialSpec, v: SpinorField,
                      use_cutoff: bool = True) -> SpinorField:
    """``kappa' (R xi (c * (xi u_v) * c))(0)``; without the cut-off when ``use_cutoff`` is False."""
    u = free_solution(slc.model, v, slc.times)
    unit = spec.with_lambda(1.0)
    if not use_cutoff:
        unit = PotentialSpec(unit.kind, 1.0, unit.ctx, c=unit.c, cutoff=CutoffSpec(1e6 * slc.tau))
    return causal_datum(slc.model, coupling_action(unit, u)).scale(DERIVATIVE_PHASE)


@dataclass(frozen=True)
class LimitReport:
    taus: tuple
    lam: float
    residuals: tuple       # ||D(tau, lam) - O(tau)|| / ||O(tau)||
    oracle_steps: tuple    # ||O(tau_k) - O(tau_{k-1})|| / ||O(tau_k)||
    limit_gap: float       # ||O(tau_max) - O(inf)|| / ||O(inf)||
    q_values: tuple


def derivation_limit_study(slices, spec_for: Callable[[SliceModel], PotentialSpec],
                           f: SpacetimeSpinorField, lam: float, j_max: int = 8) -> LimitReport:
    """Finite-difference derivative of ``s(tau, lam, xi)`` against the cut-off oracle per ``tau``."""
    model = slices[0].model
    v = causal_datum(model, f)
    res, oracles, qs = [], [], []
    for slc in slices:
        spec = spec_for(slc).with_lambda(lam)
        ns = make_neumann(slc, spec, "advanced", j_max)
        Dl = (figure1_scattering(slc, spec, v, ns) - v).scale(1.0 / lam)
        O = derivation_oracle(slc, spec, v)
        res.append((Dl - O).norm() / O.norm())
        oracles.append(O)
        qs.append(ns.q)
    steps = tuple((b - a).norm() / b.norm() for a, b in zip(oracles, oracles[1:]))
    O_inf = derivation_oracle(slices[-1], spec_for(slices[-1]), v, use_cutoff=False)
    gap = (oracles[-1] - O_inf).norm() / O_inf.norm()
    return LimitReport(tuple(s.tau for s in slices), float(lam), tuple(res), steps, float(gap), tuple(qs))
