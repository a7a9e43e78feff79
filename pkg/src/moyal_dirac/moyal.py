"""Moyal star products of sampled functions on a periodic lattice.

Plane waves multiply as ``e_k * e_p = exp(-i/2 k.Theta.p) e_{k+p}``, which
is what the oscillatory integral

    (f * h)(x) = (2 pi)^-n  int int f(x - Theta u / 2) h(x + v) exp(-i u.v) du dv

gives for ``f = e_k``, ``h = e_p`` (the ``v`` integral pins ``u = p``). On
the torus the product is therefore the twisted convolution of Fourier-series
coefficients, with ``k + p`` folded back onto the mode lattice. Sampled at
the grid points this is exact for trigonometric interpolants; for
Schwartz-type data it approximates the product on R^n as well as the grid
resolves the data.

Two evaluation routes are provided:

* block route -- when Theta splits into disjoint axis pairs ``(a, b)``
  (all constructors below), the phase factorises and the sum is done in a
  mixed representation: momentum along ``a``, spectrally shifted position
  along ``b``. Cost ``O(G_a^2 G_b log G_b)`` per pair instead of ``O(G^2)``.
* direct route -- the plain ``O(G^2)`` twisted convolution, used for any
  other antisymmetric Theta and as an internal cross-check.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product as iproduct

import numpy as np

from . import kernels
from .lattice import Lattice, LatticeError, ScalarField, SpinorField, SpacetimeSpinorField


class ThetaError(ValueError):
    pass


@dataclass(frozen=True)
class ThetaMatrix:
    """Real antisymmetric deformation matrix (units: length^2)."""

    entries: np.ndarray

    def __post_init__(self):
        m = np.array(self.entries, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ThetaError("Theta must be square")
        if np.any(m + m.T != 0):
            raise ThetaError("Theta must be exactly antisymmetric")
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def is_zero(self) -> bool:
        return not np.any(self.entries)

    @classmethod
    def zero(cls, n: int) -> "ThetaMatrix":
        return cls(np.zeros((n, n)))

    @classmethod
    def pairs(cls, n: int, pairs) -> "ThetaMatrix":
        """Block matrix from ``[(a, b, theta), ...]`` with ``Theta[a, b] = theta``."""
        m = np.zeros((n, n))
        for a, b, th in pairs:
            m[a, b] = th
            m[b, a] = -th
        return cls(m)

    @classmethod
    def symplectic_2d(cls, theta: float) -> "ThetaMatrix":
        """``theta [[0, 1], [-1, 0]]`` -- the 1+1 spacetime (or 2-d spatial) block."""
        return cls.pairs(2, [(0, 1, theta)])

    @classmethod
    def commutative_time(cls, theta: float) -> "ThetaMatrix":
        """3x3 matrix with zero time row/column and ``theta`` on the spatial block."""
        return cls.pairs(3, [(1, 2, theta)])

    @classmethod
    def four_dim(cls, theta: float) -> "ThetaMatrix":
        """``theta`` times two symplectic blocks on axes (0, 1) and (2, 3)."""
        return cls.pairs(4, [(0, 1, theta), (2, 3, theta)])

    def restrict(self, axes) -> "ThetaMatrix":
        axes = list(axes)
        return ThetaMatrix(self.entries[np.ix_(axes, axes)])

    def block_pairs(self):
        """Disjoint axis pairs ``[(a, b, Theta[a, b])]`` or ``None`` if Theta is not of that form."""
        m = self.entries
        used = set()
        out = []
        for a in range(self.n):
            for b in range(a + 1, self.n):
                if m[a, b] != 0:
                    if a in used or b in used:
                        return None
                    used.update((a, b))
                    out.append((a, b, float(m[a, b])))
        return out


@dataclass(frozen=True)
class _PairPlan:
    a: int            # axis kept in momentum space (the shorter one)
    b: int            # axis carrying the spectral shift
    theta: float      # Theta[a, b] after orientation
    ka: np.ndarray    # signed momenta along a
    kb: np.ndarray    # signed momenta along b


@dataclass(frozen=True)
class StarContext:
    """Lattice plus Theta, with the twist phases precomputed."""

    lattice: Lattice
    theta: ThetaMatrix
    phase_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.theta.n != self.lattice.dim:
            raise ThetaError(f"Theta is {self.theta.n}x{self.theta.n} but lattice has dim "
                             f"{self.lattice.dim}")
        pairs = self.theta.block_pairs()
        plans = None
        if pairs is not None:
            plans = []
            for a, b, th in pairs:
                if self.lattice.points[b] < self.lattice.points[a]:
                    a, b, th = b, a, -th
                plans.append(_PairPlan(a, b, th, self.lattice.axis_momenta(a),
                                       self.lattice.axis_momenta(b)))
        self.phase_cache["plans"] = plans
        if plans:
            # f-side: exp(+i/2 theta k_b p_a); h-side: exp(-i/2 theta p_b k_a)
            self.phase_cache["f"] = [np.exp(0.5j * pl.theta * np.outer(pl.ka, pl.kb))
                                     for pl in plans]
            self.phase_cache["h"] = [np.exp(-0.5j * pl.theta * np.outer(pl.ka, pl.kb))
                                     for pl in plans]

    @property
    def plans(self):
        return self.phase_cache["plans"]


def make_context(lattice: Lattice, theta: ThetaMatrix | float | None = None) -> StarContext:
    if theta is None:
        theta = ThetaMatrix.zero(lattice.dim)
    elif not isinstance(theta, ThetaMatrix):
        theta = ThetaMatrix(np.asarray(theta, dtype=float))
    return StarContext(lattice, theta)


def star_arrays(ctx: StarContext, f: np.ndarray, h: np.ndarray, route: str = "auto") -> np.ndarray:
    """Star product of sample arrays whose trailing axes are the lattice axes.

    Leading (batch) axes broadcast against each other.
    """
    lat = ctx.lattice
    d = lat.dim
    f = np.asarray(f, dtype=complex)
    h = np.asarray(h, dtype=complex)
    if f.shape[f.ndim - d:] != lat.shape or h.shape[h.ndim - d:] != lat.shape:
        raise LatticeError("star operands do not match the context lattice")
    if ctx.theta.is_zero:
        return f * h
    batch = np.broadcast_shapes(f.shape[:-d], h.shape[:-d])
    f = np.broadcast_to(f, batch + lat.shape).reshape((-1,) + lat.shape)
    h = np.broadcast_to(h, batch + lat.shape).reshape((-1,) + lat.shape)
    if route == "direct" or (route == "auto" and ctx.plans is None):
        out = _star_direct(ctx, f, h)
    else:
        if ctx.plans is None:
            raise ThetaError("block route needs Theta made of disjoint axis pairs")
        out = _star_blocks(ctx, f, h)
    return out.reshape(batch + lat.shape)


def _star_direct(ctx: StarContext, f: np.ndarray, h: np.ndarray) -> np.ndarray:
    lat = ctx.lattice
    G = lat.size
    axes = tuple(range(1, lat.dim + 1))
    fhat = (np.fft.fftn(f, axes=axes) / G).reshape(f.shape[0], G)
    hhat = (np.fft.fftn(h, axes=axes) / G).reshape(h.shape[0], G)
    grids = np.meshgrid(*(np.arange(n) for n in lat.points), indexing="ij")
    index = np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)
    moms = np.meshgrid(*(lat.axis_momenta(a) for a in range(lat.dim)), indexing="ij")
    kvecs = np.stack([k.ravel() for k in moms], axis=1)
    out = kernels.twisted_convolution(fhat, hhat, kvecs, index, np.array(lat.points),
                                      ctx.theta.entries)
    return G * np.fft.ifftn(out.reshape(f.shape), axes=axes)


def _star_blocks(ctx: StarContext, f: np.ndarray, h: np.ndarray) -> np.ndarray:
    plans = ctx.plans
    d = ctx.lattice.dim
    A = [pl.a for pl in plans]
    Bx = [pl.b for pl in plans]
    rest = [ax for ax in range(d) if ax not in A]
    # layout (batch, a-axes..., remaining lattice axes in original order)
    perm = [0] + [1 + ax for ax in A] + [1 + ax for ax in rest]
    inv = np.argsort(perm)
    fT = np.transpose(f, perm)
    hT = np.transpose(h, perm)
    nA = len(A)
    a_axes = tuple(range(1, 1 + nA))
    b_axes = tuple(1 + nA + rest.index(b) for b in Bx)
    GA = [ctx.lattice.points[a] for a in A]
    norm = float(np.prod(GA))
    F = np.fft.fftn(fT, axes=a_axes + b_axes) / norm
    H = np.fft.fftn(hT, axes=a_axes + b_axes) / norm
    out = np.zeros(F.shape, dtype=complex)
    nb = F.ndim

    def bshape(i, arr):
        # place a (len G_a, len G_b) table on (a_axis_i, b_axis_i)
        shp = [1] * nb
        shp[a_axes[i]] = arr.shape[0]
        shp[b_axes[i]] = arr.shape[1]
        return arr.reshape(shp)

    h_phase = 1.0
    for i in range(nA):
        h_phase = h_phase * bshape(i, ctx.phase_cache["h"][i])
    single = nA == 1
    for p in iproduct(*(range(g) for g in GA)):
        f_phase = 1.0
        for i in range(nA):
            row = ctx.phase_cache["f"][i][p[i]]
            shp = [1] * nb
            shp[b_axes[i]] = row.shape[0]
            f_phase = f_phase * row.reshape(shp)
        Fs = np.fft.ifftn(F * f_phase, axes=b_axes)
        Hp = H[(slice(None),) + tuple(p)]
        Hp = np.expand_dims(Hp, a_axes)
        Hs = np.fft.ifftn(Hp * h_phase, axes=b_axes)
        if single:
            B0 = out.shape[0]
            o = out.reshape(B0, GA[0], -1)
            kernels.twist_accumulate(o, np.ascontiguousarray(Fs).reshape(B0, GA[0], -1),
                                     np.ascontiguousarray(Hs).reshape(B0, GA[0], -1), p[0])
        else:
            out += np.roll(Fs * Hs, p, axis=a_axes)
    res = norm * np.fft.ifftn(out, axes=a_axes)
    return np.transpose(res, inv)


def star(ctx: StarContext, f: ScalarField, h: ScalarField) -> ScalarField:
    if f.lattice != ctx.lattice or h.lattice != ctx.lattice:
        raise LatticeError("star operands must live on the context lattice")
    return ScalarField(ctx.lattice, star_arrays(ctx, f.samples, h.samples))


def star_spinor_left(ctx: StarContext, b: ScalarField, v: SpinorField) -> SpinorField:
    """``b * v`` applied to every spinor component."""
    if v.lattice != ctx.lattice or b.lattice != ctx.lattice:
        raise LatticeError("spinor lattice does not match the star context")
    return SpinorField(v.lattice, star_arrays(ctx, b.samples, v.components))


def star_spinor_right(ctx: StarContext, v: SpinorField, b: ScalarField) -> SpinorField:
    if v.lattice != ctx.lattice or b.lattice != ctx.lattice:
        raise LatticeError("spinor lattice does not match the star context")
    return SpinorField(v.lattice, star_arrays(ctx, v.components, b.samples))


def star_sandwich(ctx: StarContext, c: ScalarField, v):
    """``c * v * c`` for a spinor field, or for a spacetime spinor field when
    the context lattice is the matching spacetime lattice."""
    if isinstance(v, SpacetimeSpinorField):
        arr = np.moveaxis(v.data, 1, 0)  # (N, Nt, *spatial)
        if arr.shape[1:] != ctx.lattice.shape:
            raise LatticeError("spacetime field does not match the star context")
        out = star_arrays(ctx, star_arrays(ctx, c.samples, arr), c.samples)
        return v.with_data(np.moveaxis(out, 0, 1))
    return star_spinor_right(ctx, star_spinor_left(ctx, c, v), c)


def left_matrix(ctx: StarContext, b: np.ndarray) -> np.ndarray:
    """Dense matrix of ``v -> b * v`` on the flattened lattice (row-major)."""
    G = ctx.lattice.size
    eye = np.eye(G, dtype=complex).reshape((G,) + ctx.lattice.shape)
    cols = star_arrays(ctx, np.asarray(b)[None], eye).reshape(G, G)
    return cols.T.copy()


def right_matrix(ctx: StarContext, b: np.ndarray) -> np.ndarray:
    """Dense matrix of ``v -> v * b``."""
    G = ctx.lattice.size
    eye = np.eye(G, dtype=complex).reshape((G,) + ctx.lattice.shape)
    cols = star_arrays(ctx, eye, np.asarray(b)[None]).reshape(G, G)
    return cols.T.copy()
