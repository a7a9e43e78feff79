"""Brute-force quadrature of the Moyal integral in two dimensions.

This is the reference the FFT engine is validated against; it shares no
code with it.

    (f * h)(x) = (2 pi)^-2 int int f(x - Theta u / 2) h(x + v) exp(-i u.v) d^2u d^2v

Both integrands are evaluated from analytic callables (no FFT, no samples),
and the 4-dimensional integral is done as a nested trapezoid rule on
truncated boxes: first over ``v`` for every ``(x, u)`` pair, then over ``u``.
"""
import numpy as np


def _grid2(lim, n):
    s = np.linspace(-lim, lim, n)
    w = np.full(n, s[1] - s[0])
    w[0] = w[-1] = 0.5 * (s[1] - s[0])
    X, Y = np.meshgrid(s, s, indexing="ij")
    W = np.outer(w, w)
    return np.stack([X.ravel(), Y.ravel()], axis=1), W.ravel()


def moyal_quadrature_2d(f, h, theta, xs, u_lim=14.0, nu=113, v_lim=7.0, nv=97, chunk=512):
    """Evaluate ``f * h`` at the points ``xs`` (shape ``(P, 2)``).

    ``f`` and ``h`` take two coordinate arrays; ``theta`` is a 2x2 antisymmetric array.
    """
    theta = np.asarray(theta, dtype=float)
    xs = np.asarray(xs, dtype=float)
    U, wu = _grid2(u_lim, nu)
    V, wv = _grid2(v_lim, nv)
    hv = h(xs[:, 0][None, :] + V[:, 0][:, None], xs[:, 1][None, :] + V[:, 1][:, None])  # (nv^2, P)
    hv = hv * wv[:, None]
    total = np.zeros(len(xs), dtype=complex)
    for start in range(0, len(U), chunk):
        Uc, wc = U[start:start + chunk], wu[start:start + chunk]
        inner = np.exp(-1j * (Uc @ V.T)) @ hv  # int h(x + v) exp(-i u.v) dv
        shift = 0.5 * (Uc @ theta.T)  # Theta u / 2
        fu = f(xs[:, 0][None, :] - shift[:, 0][:, None], xs[:, 1][None, :] - shift[:, 1][:, None])
        total += (wc[:, None] * fu * inner).sum(axis=0)
    return total / (2 * np.pi) ** 2


def plane_wave_phase(k, p, theta):
    """Constant ``c`` with ``e^{ik.x} * e^{ip.x} = c e^{i(k+p).x}``, from the integral:
    the ``v`` integral gives ``(2 pi)^n delta(u - p)``, leaving ``exp(-i k.Theta p / 2)``."""
    return np.exp(-0.5j * np.asarray(k) @ np.asarray(theta) @ np.asarray(p))


def plane_wave_quadrature(k, p, theta, eps=1e-10, width=16.0, n=161):
    """The plane-wave constant by quadrature of the regularized integral.

    With the damping ``exp(-eps |v|^2 / 2)`` the ``v`` integral is a normalized
    Gaussian in ``u`` of variance ``eps`` centred at ``p``; the remaining ``u``
    integral of ``exp(i k.(x - Theta u / 2))`` is done by the trapezoid rule
    over ``width`` standard deviations. The regulator biases the result by
    ``O(eps |Theta^T k|^2)``.
    """
    k = np.asarray(k, float)
    p = np.asarray(p, float)
    theta = np.asarray(theta, float)
    d = len(k)
    s = np.linspace(-width / 2, width / 2, n)
    w = np.full(n, s[1] - s[0])
    w[0] = w[-1] = 0.5 * (s[1] - s[0])
    grids = np.meshgrid(*([s] * d), indexing="ij")
    z = np.stack([g.ravel() for g in grids], axis=1)          # standard normal variable
    wz = np.prod(np.meshgrid(*([w] * d), indexing="ij"), axis=0).ravel()
    dens = np.exp(-0.5 * (z ** 2).sum(axis=1)) / (2 * np.pi) ** (d / 2)
    u = p[None, :] + np.sqrt(eps) * z
    phase = np.exp(-0.5j * (u @ theta.T) @ k)
    return complex((wz * dens * phase).sum())
