"""Periodic grids, unitary spectral transforms and sampled fields.

The torus of side lengths ``L_a`` stands in for R^n; every test object used
by the package is Schwartz class, so boxes are chosen large enough that
wrap-around stays below the tolerance of the experiment at hand.

Spectral convention (fixed project-wide): ``spectral_forward`` is the
unitary DFT over the lattice axes (``numpy.fft`` with ``norm="ortho"``),
``spectral_inverse`` its inverse. Sample ``j`` on axis ``a`` sits at
``x = -L_a/2 + j L_a / n_a`` and the momentum of mode ``j`` is
``2 pi fftfreq(n_a, L_a/n_a)[j]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

SPACE = "space"
TIME = "time"


class LatticeError(ValueError):
    """Invalid lattice or field construction."""


class PacketTooWideError(LatticeError):
    """A sampled packet does not decay below the leakage budget at the box edge."""


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Lattice:
    """A validated periodic grid (``LatticeSpec``)."""

    dim: int
    points: tuple[int, ...]
    lengths: tuple[float, ...]
    roles: tuple[str, ...]

    def __post_init__(self):
        if self.dim < 1 or len(self.points) != self.dim or len(self.lengths) != self.dim \
                or len(self.roles) != self.dim:
            raise LatticeError("dim must match the number of points, lengths and roles")
        for n in self.points:
            if n < 4 or not _is_pow2(n):
                raise LatticeError(f"points per axis must be a power of two >= 4, got {n}")
        for L in self.lengths:
            if not L > 0:
                raise LatticeError(f"box length must be positive, got {L}")
        for r in self.roles:
            if r not in (SPACE, TIME):
                raise LatticeError(f"unknown axis role {r!r}")
        if sum(r == TIME for r in self.roles) > 1:
            raise LatticeError("at most one axis may be tagged time")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points

    @property
    def size(self) -> int:
        return int(np.prod(self.points))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / n for L, n in zip(self.lengths, self.points))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def time_axis(self) -> int | None:
        return self.roles.index(TIME) if TIME in self.roles else None

    def axis_coords(self, a: int) -> np.ndarray:
        return -0.5 * self.lengths[a] + self.spacing[a] * np.arange(self.points[a])

    def axis_momenta(self, a: int) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.points[a], d=self.spacing[a])

    def coords(self) -> list[np.ndarray]:
        """Broadcastable coordinate arrays, one per axis."""
        return np.meshgrid(*(self.axis_coords(a) for a in range(self.dim)),
                           indexing="ij", sparse=True)

    def momenta(self) -> list[np.ndarray]:
        return np.meshgrid(*(self.axis_momenta(a) for a in range(self.dim)),
                           indexing="ij", sparse=True)

    def momentum_squared(self) -> np.ndarray:
        return sum(k ** 2 for k in self.momenta())

    def spatial(self) -> "Lattice":
        """The lattice with its time axis (if any) removed."""
        keep = [a for a in range(self.dim) if self.roles[a] != TIME]
        return Lattice(len(keep), tuple(self.points[a] for a in keep),
                       tuple(self.lengths[a] for a in keep), tuple(SPACE for _ in keep))


def make_lattice(dim: int, points: Sequence[int], lengths: Sequence[float],
                 roles: Sequence[str] | None = None) -> Lattice:
    if roles is None:
        roles = [SPACE] * dim
    return Lattice(int(dim), tuple(int(n) for n in points),
                   tuple(float(L) for L in lengths), tuple(roles))


def spacetime_lattice(n_times: int, tau: float, spatial: Lattice) -> Lattice:
    """Spacetime lattice whose time axis (axis 0) samples ``[-tau, tau)``."""
    return Lattice(spatial.dim + 1, (n_times,) + spatial.points,
                   (2.0 * tau,) + spatial.lengths, (TIME,) + spatial.roles)


def _axes(ndim_lattice: int) -> tuple[int, ...]:
    return tuple(range(-ndim_lattice, 0))


@dataclass(frozen=True)
class ScalarField:
    lattice: Lattice
    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex)
        if s.shape != self.lattice.shape:
            raise LatticeError(f"samples shape {s.shape} != lattice shape {self.lattice.shape}")
        object.__setattr__(self, "samples", s)

    def __add__(self, other):
        _check_same(self.lattice, other.lattice)
        return ScalarField(self.lattice, self.samples + other.samples)

    def __sub__(self, other):
        _check_same(self.lattice, other.lattice)
        return ScalarField(self.lattice, self.samples - other.samples)

    def scale(self, alpha) -> "ScalarField":
        return ScalarField(self.lattice, alpha * self.samples)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.samples) ** 2) * self.lattice.cell_volume))


@dataclass(frozen=True)
class SpinorField:
    """N spinor components sampled on a spatial lattice.

    ``components`` has shape ``(N, *lattice.shape)``. A leading batch axis
    ``(B, N, *shape)`` is accepted by the propagation routines for
    vectorised work, but the public field type is unbatched.
    """

    lattice: Lattice
    components: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.components, dtype=complex)
        if c.ndim != self.lattice.dim + 1 or c.shape[1:] != self.lattice.shape:
            raise LatticeError(f"component shape {c.shape} does not fit lattice {self.lattice.shape}")
        object.__setattr__(self, "components", c)

    @property
    def N(self) -> int:
        return self.components.shape[0]

    def __add__(self, other):
        _check_same(self.lattice, other.lattice)
        return SpinorField(self.lattice, self.components + other.components)

    def __sub__(self, other):
        _check_same(self.lattice, other.lattice)
        return SpinorField(self.lattice, self.components - other.components)

    def scale(self, alpha) -> "SpinorField":
        return SpinorField(self.lattice, alpha * self.components)

    def norm(self) -> float:
        return float(np.sqrt(np.real(l2_inner(self, self))))


@dataclass(frozen=True)
class SpacetimeSpinorField:
    """Spinor samples on a uniform time grid times a spatial lattice.

    ``data`` has shape ``(Nt, N, *spatial.shape)``.
    """

    times: np.ndarray
    lattice: Lattice
    data: np.ndarray
    _checked: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        d = np.asarray(self.data, dtype=complex)
        if t.ndim != 1 or len(t) < 2:
            raise LatticeError("time grid needs at least two samples")
        dt = np.diff(t)
        if not np.all(dt > 0) or np.ptp(dt) > 1e-9 * abs(dt[0]):
            raise LatticeError("time samples must be strictly increasing and uniform")
        if d.shape[0] != len(t) or d.shape[2:] != self.lattice.shape:
            raise LatticeError(f"data shape {d.shape} does not fit grid")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "data", d)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def N(self) -> int:
        return self.data.shape[1]

    @property
    def slices(self) -> list[SpinorField]:
        return [SpinorField(self.lattice, d) for d in self.data]

    def with_data(self, data) -> "SpacetimeSpinorField":
        return SpacetimeSpinorField(self.times, self.lattice, data)

    def __add__(self, other):
        return self.with_data(self.data + other.data)

    def __sub__(self, other):
        return self.with_data(self.data - other.data)

    def scale(self, alpha) -> "SpacetimeSpinorField":
        return self.with_data(alpha * self.data)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.data) ** 2) * self.dt * self.lattice.cell_volume))

    def spacetime_lattice(self) -> Lattice:
        """Spacetime lattice matching this grid (time period ``Nt * dt``)."""
        Nt = len(self.times)
        return Lattice(self.lattice.dim + 1, (Nt,) + self.lattice.points,
                       (Nt * self.dt,) + self.lattice.lengths, (TIME,) + self.lattice.roles)


def _check_same(a: Lattice, b: Lattice):
    if a != b:
        raise LatticeError("fields live on different lattices")


def slice_times(n_times: int, tau: float) -> np.ndarray:
    """Uniform grid ``-tau + j * 2 tau / n_times`` on ``[-tau, tau)``."""
    return -tau + (2.0 * tau / n_times) * np.arange(n_times)


def spectral_forward(field):
    """Unitary DFT over the lattice axes of a scalar or spinor field."""
    if isinstance(field, ScalarField):
        return ScalarField(field.lattice, np.fft.fftn(field.samples, norm="ortho"))
    if isinstance(field, SpinorField):
        axes = _axes(field.lattice.dim)
        return SpinorField(field.lattice, np.fft.fftn(field.components, axes=axes, norm="ortho"))
    raise TypeError(f"cannot transform {type(field).__name__}")


def spectral_inverse(field):
    if isinstance(field, ScalarField):
        return ScalarField(field.lattice, np.fft.ifftn(field.samples, norm="ortho"))
    if isinstance(field, SpinorField):
        axes = _axes(field.lattice.dim)
        return SpinorField(field.lattice, np.fft.ifftn(field.components, axes=axes, norm="ortho"))
    raise TypeError(f"cannot transform {type(field).__name__}")


def l2_inner(f: SpinorField, h: SpinorField) -> complex:
    """Component-wise Hermitian L^2 product, antilinear in ``f``."""
    if f.lattice != h.lattice or f.components.shape != h.components.shape:
        raise LatticeError("l2_inner needs fields of identical shape on one lattice")
    return complex(np.vdot(f.components, h.components) * f.lattice.cell_volume)


def spacetime_inner(f: SpacetimeSpinorField, h: SpacetimeSpinorField) -> complex:
    if f.data.shape != h.data.shape or f.lattice != h.lattice:
        raise LatticeError("spacetime_inner needs fields of identical shape")
    return complex(np.vdot(f.data, h.data) * f.dt * f.lattice.cell_volume)


def boundary_leakage(samples: np.ndarray, ndim: int) -> float:
    """Largest |value| on the outer faces of the last ``ndim`` axes, relative to the max."""
    a = np.abs(np.asarray(samples))
    peak = a.max()
    if peak == 0:
        return 0.0
    edge = 0.0
    for ax in range(a.ndim - ndim, a.ndim):
        edge = max(edge, np.take(a, 0, axis=ax).max(), np.take(a, -1, axis=ax).max())
    return float(edge / peak)


def gaussian_scalar(lattice: Lattice, center: Sequence[float], width,
                    amplitude: float = 1.0) -> ScalarField:
    """Real Gaussian profile ``amplitude * exp(-sum (x-c)^2 / (2 w^2))``."""
    widths = np.broadcast_to(np.asarray(width, dtype=float), (lattice.dim,))
    arg = sum(((x - c) / w) ** 2 for x, c, w in zip(lattice.coords(), center, widths))
    return ScalarField(lattice, amplitude * np.exp(-0.5 * arg))


@dataclass(frozen=True)
class PacketReport:
    boundary_max: float
    budget: float


def sample_gaussian_packet(lattice: Lattice, center: Sequence[float], width: float,
                           momentum: Sequence[float], spinor_weights: Sequence[complex],
                           budget: float = 1e-10) -> tuple[SpinorField, PacketReport]:
    """Modulated Gaussian ``w_s exp(-|x-c|^2/(2 width^2)) exp(i p.x)``.

    Raises :class:`PacketTooWideError` when the envelope at the box boundary
    exceeds ``budget`` (relative to its peak).
    """
    if not width > 0:
        raise LatticeError("width must be positive")
    xs = lattice.coords()
    arg = sum(((x - c) / width) ** 2 for x, c in zip(xs, center))
    env = np.exp(-0.5 * arg)
    leak = boundary_leakage(env, lattice.dim)
    if leak >= budget:
        raise PacketTooWideError(f"packet boundary value {leak:.3e} exceeds budget {budget:.1e}")
    phase = np.exp(1j * sum(p * x for p, x in zip(momentum, xs)))
    w = np.asarray(spinor_weights, dtype=complex)
    comps = w.reshape((-1,) + (1,) * lattice.dim) * (env * phase)[None]
    return SpinorField(lattice, comps), PacketReport(leak, budget)


def sample_spacetime_packet(times: np.ndarray, lattice: Lattice, t_center: float,
                            t_width: float, center, width, momentum, spinor_weights,
                            budget: float = 1e-10) -> SpacetimeSpinorField:
    """Gaussian-in-time envelope times :func:`sample_gaussian_packet`."""
    v, _ = sample_gaussian_packet(lattice, center, width, momentum, spinor_weights, budget)
    times = np.asarray(times, dtype=float)
    env_t = np.exp(-0.5 * ((times - t_center) / t_width) ** 2)
    if max(env_t[0], env_t[-1]) >= budget:
        raise PacketTooWideError("packet time envelope does not decay inside the window")
    return SpacetimeSpinorField(times, lattice, env_t[:, None, ...].reshape(
        (-1,) + (1,) * (lattice.dim + 1)) * v.components[None])


def random_spinor(lattice: Lattice, N: int, rng: np.random.Generator) -> SpinorField:
    c = rng.standard_normal((N,) + lattice.shape) + 1j * rng.standard_normal((N,) + lattice.shape)
    return SpinorField(lattice, c)
