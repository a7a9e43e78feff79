"""Pure NumPy implementations of the hot kernels.

These are the reference versions; the compiled module ``_kernels`` must
produce the same numbers (up to floating-point summation order).
"""
import numpy as np


def twist_accumulate(out, fs, hs, shift):
    """``out[:, (k + shift) % G, :] += fs[:, k, :] * hs[:, k, :]``.

    All three arrays have shape ``(B, G, M)`` and complex128 dtype; ``out``
    is modified in place.
    """
    prod = fs * hs
    out += np.roll(prod, shift, axis=1)
    return out


def twisted_convolution(fhat, hhat, kvecs, index, dims, theta):
    """Direct twisted convolution on a periodic momentum lattice.

    ``fhat``/``hhat`` are ``(B, G)`` Fourier-series coefficients on a lattice
    with ``G = prod(dims)`` modes, ``kvecs`` the ``(G, n)`` signed momenta,
    ``index`` the ``(G, n)`` integer mode indices. Returns the ``(B, G)``
    coefficients of ``sum_{k,p} f(k) h(p) exp(-i/2 k.Theta.p) e_{k+p}``
    with ``k + p`` wrapped onto the lattice.
    """
    fhat = np.asarray(fhat, dtype=complex)
    hhat = np.asarray(hhat, dtype=complex)
    dims = np.asarray(dims, dtype=np.int64)
    G = kvecs.shape[0]
    strides = np.ones(len(dims), dtype=np.int64)
    for a in range(len(dims) - 2, -1, -1):
        strides[a] = strides[a + 1] * dims[a + 1]
    theta_p = kvecs @ np.asarray(theta, dtype=float).T  # (Theta p) for each p
    out = np.zeros((fhat.shape[0], G), dtype=complex)
    for j in range(G):
        phase = np.exp(-0.5j * (kvecs @ theta_p[j]))
        target = (((index + index[j]) % dims) * strides).sum(axis=1)
        contrib = fhat * (hhat[:, j:j + 1] * phase[None, :])
        np.add.at(out, (slice(None), target), contrib)
    return out


def apply_mode_matrices(mats, vec):
    """Per-mode matrix action: ``out[b, n, g] = sum_m mats[g, n, m] vec[b, m, g]``."""
    return np.einsum("gnm,bmg->bng", mats, vec, optimize=True)
