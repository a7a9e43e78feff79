"""External potentials: pointwise and Moyal couplings, time cut-offs, norm gates.

Two families are supported.

* Commutative-time ("HT") kinds act on Cauchy data at a fixed time ``t``
  through a factorized profile ``c(t, x) = a(t) b(x)``::

      pointwise      V(t) v = lam a(t)   gamma^0 (b v)
      star_sym       V(t) v = lam a(t)   gamma^0 (b * v + v * b)
      star_sandwich  V(t) v = lam a(t)^2 gamma^0 (b * v * b)

  with the spatial star product. ``V(t)`` enters the evolution as
  ``i d_t chi + (H0 + V(t)) chi = 0``, equivalently ``(D + lam P[c]) chi = 0``
  with the unit coupling ``P[c]`` returned by :func:`coupling_action`.

* The time-noncommutative ("NCT") sandwich acts on whole spacetime fields::

      V_xi(lam) F = lam xi (c * (xi F) * c)

  with the spacetime star product and a smooth cut-off ``xi(t)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lattice import LatticeError, ScalarField, SpacetimeSpinorField, SpinorField
from .moyal import StarContext, left_matrix, right_matrix, star_arrays

HT_KINDS = ("pointwise", "star_sym", "star_sandwich")
KINDS = HT_KINDS + ("nct_sandwich",)
DENSE_LIMIT = 4096


class PotentialError(ValueError):
    pass


def smooth_step(x) -> np.ndarray:
    """C-infinity step: 0 for ``x <= 0``, 1 for ``x >= 1``."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        e0 = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        e1 = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return e0 / (e0 + e1)


@dataclass(frozen=True)
class TimeBump:
    """``amplitude * exp(1 - 1/(1 - s^2))`` with ``s = (t - center)/half_width``; zero for ``|s| >= 1``."""

    center: float = 0.0
    half_width: float = 1.0
    amplitude: float = 1.0

    def __post_init__(self):
        if not self.half_width > 0:
            raise PotentialError("bump half-width must be positive")

    def __call__(self, t) -> np.ndarray:
        s = (np.asarray(t, dtype=float) - self.center) / self.half_width
        inside = np.abs(s) < 1
        with np.errstate(divide="ignore", over="ignore"):
            val = np.where(inside, np.exp(1.0 - 1.0 / np.where(inside, 1.0 - s * s, 1.0)), 0.0)
        return self.amplitude * val

    @property
    def support(self) -> tuple[float, float]:
        return (self.center - self.half_width, self.center + self.half_width)


@dataclass(frozen=True)
class CutoffSpec:
    """Cut-off ``xi``: 1 on ``[-tau/2, tau/2]``, 0 outside ``(-tau/sqrt2, tau/sqrt2)``."""

    tau: float

    def __post_init__(self):
        if not self.tau > 0:
            raise PotentialError("tau must be positive")

    def __call__(self, t) -> np.ndarray:
        inner, outer = self.tau / 2, self.tau / np.sqrt(2)
        return smooth_step((outer - np.abs(np.asarray(t, dtype=float))) / (outer - inner))

    @property
    def support(self) -> tuple[float, float]:
        return (-self.tau / np.sqrt(2), self.tau / np.sqrt(2))


def _real_profile(field: ScalarField, name: str) -> np.ndarray:
    s = np.asarray(field.samples)
    if np.iscomplexobj(s):
        if np.abs(s.imag).max() > 1e-14:
            raise PotentialError(f"profile {name} must be real-valued")
        s = s.real
    return s.astype(float)


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    """Coupling specification.

    HT kinds use ``a`` (a :class:`TimeBump`) and ``b`` (spatial profile) with
    ``ctx`` a spatial star context. ``nct_sandwich`` uses ``c`` (spacetime
    profile), ``ctx`` over the matching spacetime lattice and ``cutoff``.
    ``time_power`` overrides the exponent of ``a`` (default 2 for
    ``star_sandwich``, 1 otherwise).
    """

    kind: str
    lam: float
    ctx: StarContext
    a: TimeBump | None = None
    b: ScalarField | None = None
    c: ScalarField | None = None
    cutoff: CutoffSpec | None = None
    time_power: int | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise PotentialError(f"unknown potential kind {self.kind!r}")
        if not (self.lam >= 0 and np.isfinite(self.lam)):
            raise PotentialError("coupling lambda must be a finite non-negative real")
        if self.kind in HT_KINDS:
            if self.a is None or self.b is None:
                raise PotentialError(f"{self.kind} needs time profile a and spatial profile b")
            if self.b.lattice != self.ctx.lattice:
                raise LatticeError("profile b does not live on the star-context lattice")
            _real_profile(self.b, "b")
        else:
            if self.c is None or self.cutoff is None:
                raise PotentialError("nct_sandwich needs profile c and a cutoff")
            if self.c.lattice != self.ctx.lattice or self.ctx.lattice.time_axis != 0:
                raise LatticeError("profile c must live on the spacetime star-context lattice")
            _real_profile(self.c, "c")

    @property
    def power(self) -> int:
        if self.time_power is not None:
            return self.time_power
        return 2 if self.kind == "star_sandwich" else 1

    def with_lambda(self, lam: float) -> "PotentialSpec":
        """Same coupling at a different ``lam``; dense operators are shared, not rebuilt."""
        return PotentialSpec(self.kind, float(lam), self.ctx, self.a, self.b, self.c,
                             self.cutoff, self.time_power, self._cache)

    def _cached(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    def time_factor(self, t) -> np.ndarray:
        return self.a(t) ** self.power

    # -- spatial unit operator K (acting on each spinor component) ----------
    @property
    def _b(self) -> np.ndarray:
        return self._cached("b", lambda: _real_profile(self.b, "b"))

    @property
    def spatial_matrix(self) -> np.ndarray:
        """Dense Hermitian ``K`` on the flattened lattice; the pointwise kind returns its diagonal.

        For ``Theta != 0`` the star matrices are dealiased (momentum transfers
        that wrap around the grid are dropped) so that ``L_b`` and ``R_b``
        are exactly Hermitian, and the sandwich is taken as
        ``(L_b R_b + R_b L_b) / 2``. On resolved data these differ from the
        matrix-free star products only by aliasing terms.
        """
        return self._cached("K", self._build_spatial_matrix)

    def _build_spatial_matrix(self) -> np.ndarray:
        if self.kind == "pointwise":
            return self._b.ravel().astype(complex)
        G = self.ctx.lattice.size
        if G > DENSE_LIMIT:
            raise PotentialError("lattice too large for a dense spatial operator")
        L = left_matrix(self.ctx, self._b)
        R = right_matrix(self.ctx, self._b)
        if not self.ctx.theta.is_zero:
            L = dealias_matrix(L, self.ctx.lattice.shape)
            R = dealias_matrix(R, self.ctx.lattice.shape)
        if self.kind == "star_sym":
            return L + R
        return 0.5 * (L @ R + R @ L)

    @property
    def spatial_eig(self) -> tuple[np.ndarray, np.ndarray | None]:
        """``(w, W)`` with ``K = W diag(w) W^*`` (``W`` is None for the pointwise kind)."""
        if self.kind == "pointwise":
            return self._b.ravel(), None
        return self._cached("eig", lambda: np.linalg.eigh(self.spatial_matrix))

    @property
    def _spatial_T(self) -> np.ndarray:
        return self._cached("KT", lambda: np.ascontiguousarray(self.spatial_matrix.T))

    def apply_spatial(self, arr: np.ndarray, dense: bool = True) -> np.ndarray:
        """``K`` on an array ``(..., N, *spatial)``."""
        if self.kind not in HT_KINDS:
            raise PotentialError("spatial operator only defined for HT kinds")
        shape = self.ctx.lattice.shape
        if self.kind == "pointwise":
            return self._b * arr
        if dense and self.ctx.lattice.size <= DENSE_LIMIT:
            flat = arr.reshape(arr.shape[:-len(shape)] + (-1,))
            return (flat @ self._spatial_T).reshape(arr.shape)
        if self.kind == "star_sym":
            return star_arrays(self.ctx, self._b, arr) + star_arrays(self.ctx, arr, self._b)
        return star_arrays(self.ctx, star_arrays(self.ctx, self._b, arr), self._b)


def dealias_matrix(K: np.ndarray, shape: tuple) -> np.ndarray:
    """Zero the entries of ``K`` whose momentum transfer wraps around the grid."""
    d = len(shape)
    A = K.reshape(shape + shape)
    A = np.fft.ifftn(np.fft.fftn(A, axes=range(d), norm="ortho"), axes=range(d, 2 * d), norm="ortho")
    mask = np.ones(shape + shape, dtype=bool)
    for ax, n in enumerate(shape):
        idx = np.fft.fftfreq(n, 1.0 / n)
        diff = np.abs(idx[:, None] - idx[None, :]) < n / 2
        view = [1] * (2 * d)
        view[ax], view[d + ax] = n, n
        mask &= diff.reshape(view)
    A = np.where(mask, A, 0.0)
    A = np.fft.fftn(np.fft.ifftn(A, axes=range(d), norm="ortho"), axes=range(d, 2 * d), norm="ortho")
    return A.reshape(K.shape)


def _beta_apply(beta: np.ndarray, arr: np.ndarray, axis: int) -> np.ndarray:
    return np.moveaxis(np.tensordot(beta, np.moveaxis(arr, axis, 0), axes=1), 0, axis)


def apply_potential_ht(spec: PotentialSpec, t: float, v: SpinorField, beta: np.ndarray) -> SpinorField:
    """``V(t) v`` for an HT kind; ``beta`` is ``gamma^0`` of the representation."""
    if spec.kind not in HT_KINDS:
        raise PotentialError(f"{spec.kind} is not a commutative-time kind")
    if v.lattice != spec.ctx.lattice:
        raise LatticeError("spinor does not live on the potential lattice")
    g = spec.lam * float(spec.time_factor(t))
    if g == 0:
        return SpinorField(v.lattice, np.zeros_like(v.components))
    return SpinorField(v.lattice, g * _beta_apply(beta, spec.apply_spatial(v.components), 0))


def coupling_action(spec: PotentialSpec, F: SpacetimeSpinorField) -> SpacetimeSpinorField:
    """Unit-coupling ``P[c] F`` (no ``gamma^0``, ``lam = 1``) on a spacetime field.

    For HT kinds this is ``a(t)^p K F(t)``; for ``nct_sandwich`` it is
    ``xi (c * (xi F) * c)``.
    """
    if spec.kind == "nct_sandwich":
        return _nct_unit(spec, F)
    if F.lattice != spec.ctx.lattice:
        raise LatticeError("field does not live on the potential lattice")
    w = spec.time_factor(F.times).reshape((-1,) + (1,) * (F.data.ndim - 1))
    return F.with_data(w * spec.apply_spatial(F.data))


def _nct_unit(spec: PotentialSpec, F: SpacetimeSpinorField) -> SpacetimeSpinorField:
    lat = spec.ctx.lattice
    if (len(F.times),) + F.lattice.shape != lat.shape:
        raise LatticeError("field grid does not match the spacetime star context")
    if abs(len(F.times) * F.dt - lat.lengths[0]) > 1e-9 * lat.lengths[0]:
        raise LatticeError("field time window does not match the star context period")
    xi = spec.cutoff(F.times).reshape((1, -1) + (1,) * F.lattice.dim)
    c = _real_profile(spec.c, "c")
    arr = xi * np.moveaxis(F.data, 1, 0)  # (N, Nt, *spatial)
    out = xi * star_arrays(spec.ctx, star_arrays(spec.ctx, c, arr), c)
    return F.with_data(np.moveaxis(out, 0, 1))


def apply_potential_nct(spec: PotentialSpec, F: SpacetimeSpinorField) -> SpacetimeSpinorField:
    """``V_xi(lam) F = lam xi (c * (xi F) * c)``."""
    if spec.kind != "nct_sandwich":
        raise PotentialError(f"{spec.kind} is not the time-noncommutative kind")
    if spec.lam == 0:
        return F.with_data(np.zeros_like(F.data))
    return _nct_unit(spec, F).scale(spec.lam)


@dataclass(frozen=True)
class NormBound:
    estimate: float   # power-iteration estimate of ||V_xi(lam) R^+-||
    bound: float      # estimate times the safety factor
    iterations: int


def potential_operator_norm_bound(spec: PotentialSpec, model, times: np.ndarray,
                                  which: str = "advanced", iters: int = 40,
                                  safety: float = 1.1, seed: int = 0) -> float:
    """Upper-bound estimate of ``||V_xi(lam) R^{+-}||`` on the discretized slice.

    The operator is restricted to fields supported in ``supp xi`` (the only
    inputs the Neumann series produces); its adjoint uses
    ``(R^-)^* = gamma^0 R^+ gamma^0`` and the self-adjointness of the
    sandwich with a real profile.
    """
    return norm_bound_report(spec, model, times, which, iters, safety, seed).bound


def norm_bound_report(spec: PotentialSpec, model, times: np.ndarray, which: str = "advanced",
                      iters: int = 40, safety: float = 1.1, seed: int = 0) -> NormBound:
    from .dirac import fundamental_solution
    if spec.kind != "nct_sandwich":
        raise PotentialError("norm bound is defined for the nct_sandwich kind")
    if spec.lam == 0:
        return NormBound(0.0, 0.0, 0)
    times = np.asarray(times, dtype=float)
    lo, hi = spec.cutoff.support
    mask = ((times > lo) & (times < hi)).reshape((-1,) + (1,) * (model.lattice.dim + 1))
    other = {"advanced": "retarded", "retarded": "advanced"}[which]
    beta = model.rep.beta
    shape = (len(times), model.N) + model.lattice.shape

    def wrap(x):
        return SpacetimeSpinorField(times, model.lattice, x.reshape(shape))

    def apply(x):
        Rx = fundamental_solution(model, wrap(mask * x.reshape(shape)), which, window_tol=np.inf)
        return _nct_unit(spec, Rx).data.ravel()

    def apply_adj(y):
        Vy = _nct_unit(spec, wrap(y)).data
        Rs = fundamental_solution(model, wrap(_beta_apply(beta, Vy, 1)), other, window_tol=np.inf)
        return (mask * _beta_apply(beta, Rs.data, 1)).ravel()

    rng = np.random.default_rng(seed)
    x0 = mask * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    x = x0.ravel() / np.linalg.norm(x0)
    sigma, k = 0.0, 0
    for k in range(1, iters + 1):
        y = apply_adj(apply(x))
        ny = np.linalg.norm(y)
        if ny == 0:
            break
        new = np.sqrt(ny)
        x = y / ny
        done = abs(new - sigma) <= 1e-8 * new
        sigma = new
        if done:
            break
    est = spec.lam * sigma
    return NormBound(est, safety * est, k)
