# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops in ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin

cnp.import_array()


def twist_accumulate(double complex[:, :, ::1] out,
                     const double complex[:, :, ::1] fs,
                     const double complex[:, :, ::1] hs,
                     Py_ssize_t shift):
    cdef Py_ssize_t B = out.shape[0], G = out.shape[1], M = out.shape[2]
    cdef Py_ssize_t b, k, m, t
    shift = shift % G
    if shift < 0:
        shift += G
    with nogil:
        for b in range(B):
            for k in range(G):
                t = k + shift
                if t >= G:
                    t -= G
                for m in range(M):
                    out[b, t, m] = out[b, t, m] + fs[b, k, m] * hs[b, k, m]
    return np.asarray(out)


def twisted_convolution(fhat, hhat, kvecs, index, dims, theta):
    cdef double complex[:, ::1] f = np.ascontiguousarray(fhat, dtype=np.complex128)
    cdef double complex[:, ::1] h = np.ascontiguousarray(hhat, dtype=np.complex128)
    cdef double[:, ::1] kv = np.ascontiguousarray(kvecs, dtype=np.float64)
    cdef long[:, ::1] idx = np.ascontiguousarray(index, dtype=np.int64)
    cdef long[::1] dm = np.ascontiguousarray(dims, dtype=np.int64)
    cdef double[:, ::1] tp = np.ascontiguousarray(
        np.asarray(kvecs, dtype=np.float64) @ np.asarray(theta, dtype=np.float64).T)
    cdef Py_ssize_t B = f.shape[0], G = f.shape[1], n = kv.shape[1]
    out_arr = np.zeros((B, G), dtype=np.complex128)
    cdef double complex[:, ::1] out = out_arr
    cdef long[::1] strides = np.ones(n, dtype=np.int64)
    cdef Py_ssize_t a, j, k, b, target
    cdef double ph
    cdef double complex w
    for a in range(n - 2, -1, -1):
        strides[a] = strides[a + 1] * dm[a + 1]
    with nogil:
        for j in range(G):
            for k in range(G):
                ph = 0.0
                target = 0
                for a in range(n):
                    ph = ph + kv[k, a] * tp[j, a]
                    target = target + ((idx[k, a] + idx[j, a]) % dm[a]) * strides[a]
                w = cos(0.5 * ph) - 1j * sin(0.5 * ph)
                for b in range(B):
                    out[b, target] = out[b, target] + f[b, k] * h[b, j] * w
    return out_arr


def apply_mode_matrices(mats, vec):
    cdef double complex[:, :, ::1] A = np.ascontiguousarray(mats, dtype=np.complex128)
    cdef double complex[:, :, ::1] v = np.ascontiguousarray(vec, dtype=np.complex128)
    cdef Py_ssize_t G = A.shape[0], N = A.shape[1], B = v.shape[0]
    out_arr = np.zeros((B, N, G), dtype=np.complex128)
    cdef double complex[:, :, ::1] out = out_arr
    cdef Py_ssize_t b, n, m, g
    with nogil:
        for b in range(B):
            for n in range(N):
                for m in range(N):
                    for g in range(G):
                        out[b, n, g] = out[b, n, g] + A[g, n, m] * v[b, m, g]
    return out_arr
