"""Pure-numpy implementations of the hot elementwise kernels.

Same contract as the compiled ``_core`` module: every function takes flat
C-contiguous float64 arrays and returns a new flat array.
"""

import numpy as np


def hermite_series(coeffs, x):
    """Evaluate sum_k coeffs[k] * h_k(x) with normalized Hermite h_k."""
    out = np.full_like(x, coeffs[0])
    if len(coeffs) == 1:
        return out
    h_prev = np.ones_like(x)
    h_cur = x.copy()
    out += coeffs[1] * h_cur
    for k in range(1, len(coeffs) - 1):
        h_next = (x * h_cur - np.sqrt(k) * h_prev) / np.sqrt(k + 1.0)
        h_prev, h_cur = h_cur, h_next
        out += coeffs[k + 1] * h_cur
    return out


def power_series(coeffs, rho):
    """Horner evaluation of sum_k coeffs[k] * rho**k."""
    out = np.full_like(rho, coeffs[-1])
    for c in coeffs[-2::-1]:
        out *= rho
        out += c
    return out


def hadamard_power_sums(gram, n, max_ell):
    """s[l] = sum_{i != j} G_ij ** (2 (l + 1)) for l = 0..max_ell.

    ``gram`` is the flattened row-major n x n Gram matrix.
    """
    g = gram.reshape(n, n)
    sq = g * g
    np.fill_diagonal(sq, 0.0)
    out = np.empty(max_ell + 1)
    power = sq.copy()
    for ell in range(max_ell + 1):
        out[ell] = power.sum()
        power *= sq
    return out
