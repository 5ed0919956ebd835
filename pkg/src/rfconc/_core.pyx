# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot elementwise kernels (see ``_core_py``)."""

import numpy as np
from libc.math cimport sqrt


def hermite_series(const double[::1] coeffs, const double[::1] x):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t m = coeffs.shape[0]
    cdef Py_ssize_t i, k
    cdef double xi, h_prev, h_cur, h_next, acc
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double[::1] rk = np.sqrt(np.arange(m, dtype=np.float64))
    for i in range(n):
        xi = x[i]
        acc = coeffs[0]
        if m > 1:
            h_prev = 1.0
            h_cur = xi
            acc = acc + coeffs[1] * h_cur
            for k in range(1, m - 1):
                h_next = (xi * h_cur - rk[k] * h_prev) / rk[k + 1]
                h_prev = h_cur
                h_cur = h_next
                acc = acc + coeffs[k + 1] * h_cur
        out[i] = acc
    return out_arr


def power_series(const double[::1] coeffs, const double[::1] rho):
    cdef Py_ssize_t n = rho.shape[0]
    cdef Py_ssize_t m = coeffs.shape[0]
    cdef Py_ssize_t i, k
    cdef double r, acc
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    for i in range(n):
        r = rho[i]
        acc = coeffs[m - 1]
        for k in range(m - 2, -1, -1):
            acc = acc * r + coeffs[k]
        out[i] = acc
    return out_arr


def hadamard_power_sums(const double[::1] gram, Py_ssize_t n, Py_ssize_t max_ell):
    cdef Py_ssize_t i, j, ell
    cdef double g, sq, p
    out_arr = np.zeros(max_ell + 1, dtype=np.float64)
    cdef double[::1] out = out_arr
    # fixed (i, j) traversal order keeps the reduction deterministic
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            g = gram[i * n + j]
            sq = g * g
            p = sq
            for ell in range(max_ell + 1):
                out[ell] += p
                p = p * sq
    return out_arr
