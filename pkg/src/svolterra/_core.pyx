# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: Volterra forward substitution and direct causal convolution."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline double _lag_dot(const double* w, const double* x, Py_ssize_t lo, Py_ssize_t n) noexcept nogil:
    # sum_{m=lo}^{n} w[m] * x[n - m]; four accumulators break the add dependency chain
    cdef double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0
    cdef Py_ssize_t m = lo
    while m + 3 <= n:
        a0 += w[m] * x[n - m]
        a1 += w[m + 1] * x[n - m - 1]
        a2 += w[m + 2] * x[n - m - 2]
        a3 += w[m + 3] * x[n - m - 3]
        m += 4
    while m <= n:
        a0 += w[m] * x[n - m]
        m += 1
    return (a0 + a1) + (a2 + a3)


def volterra_solve(omega, left, mu, forcing):
    cdef const double[::1] om = np.ascontiguousarray(omega, dtype=np.float64)
    cdef const double[::1] lw = np.ascontiguousarray(left, dtype=np.float64)
    cdef const double[::1] mv = np.ascontiguousarray(mu, dtype=np.float64)
    cdef const double[:, :, ::1] f = np.ascontiguousarray(forcing, dtype=np.float64)
    cdef Py_ssize_t P = f.shape[0], K = f.shape[1], L = f.shape[2]
    out = np.empty((P, K, L), dtype=np.float64)
    cdef double[:, :, ::1] x = out
    cdef Py_ssize_t p, k, n
    cdef double acc, denom, muk
    cdef double* row
    with nogil:
        for k in range(K):
            muk = mv[k]
            denom = 1.0 - muk * om[0]
            for p in range(P):
                row = &x[p, k, 0]
                row[0] = f[p, k, 0]
                for n in range(1, L):
                    acc = _lag_dot(&om[0], row, 1, n) - lw[n] * row[0]
                    row[n] = (f[p, k, n] + muk * acc) / denom
    return out


def causal_convolve(kern, sig):
    cdef const double[:, ::1] h = np.ascontiguousarray(kern, dtype=np.float64)
    cdef const double[:, :, ::1] s = np.ascontiguousarray(sig, dtype=np.float64)
    cdef Py_ssize_t P = s.shape[0], K = s.shape[1], L = s.shape[2]
    out = np.empty((P, K, L), dtype=np.float64)
    cdef double[:, :, ::1] y = out
    cdef Py_ssize_t p, k, n
    with nogil:
        for p in range(P):
            for k in range(K):
                for n in range(L):
                    y[p, k, n] = _lag_dot(&h[k, 0], &s[p, k, 0], 0, n)
    return out
