# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: exponential sums and dyadic block sums.

Semantics must match primecircle.kernels.pure exactly; the test suite
cross-checks the two implementations on random inputs.
"""

from libc.math cimport cos, sin, M_PI
from libc.stdlib cimport malloc, free

import numpy as np


def exp_sums(long long[::1] support, double[::1] weights, double[::1] xis):
    """Sum_j weights[j] * exp(-2*pi*i*support[j]*xi) for each xi."""
    cdef Py_ssize_t n = support.shape[0]
    cdef Py_ssize_t m = xis.shape[0]
    out = np.empty(m, dtype=np.complex128)
    cdef double complex[::1] ov = out
    cdef Py_ssize_t i, j
    cdef double phase, re, im, w, t
    for i in range(m):
        re = 0.0
        im = 0.0
        t = -2.0 * M_PI * xis[i]
        for j in range(n):
            phase = t * support[j]
            w = weights[j]
            re += w * cos(phase)
            im += w * sin(phase)
        ov[i] = re + 1j * im
    return out


def dyadic_block_sums(long long[::1] targets, long long[::1] sources,
                      double[::1] lam, int kmax):
    """Per-target sums of lam[x-y] over y in sources with x-y in (2^(k-1), 2^k].

    Block k=0 is the single difference x-y = 1.  ``sources`` must be sorted
    ascending and ``lam`` must cover indices up to 2**kmax.
    Returns an array of shape (len(targets), kmax+1).
    """
    cdef Py_ssize_t nt = targets.shape[0]
    cdef Py_ssize_t ns = sources.shape[0]
    out = np.zeros((nt, kmax + 1), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, j, lo, hi
    cdef long long x, ylo, yhi, d
    cdef int k
    cdef double acc
    for i in range(nt):
        x = targets[i]
        for k in range(kmax + 1):
            # differences d in (2^(k-1), 2^k]  <=>  y in [x - 2^k, x - 2^(k-1) - 1]
            yhi = x - 1 if k == 0 else x - (1LL << (k - 1)) - 1
            ylo = x - (1LL << k)
            lo = _bisect_left(sources, ylo, ns)
            hi = _bisect_left(sources, yhi + 1, ns)
            acc = 0.0
            for j in range(lo, hi):
                d = x - sources[j]
                acc += lam[d]
            ov[i, k] = acc
    return out


cdef inline Py_ssize_t _bisect_left(long long[::1] a, long long v, Py_ssize_t n):
    cdef Py_ssize_t lo = 0, hi = n, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if a[mid] < v:
            lo = mid + 1
        else:
            hi = mid
    return lo
