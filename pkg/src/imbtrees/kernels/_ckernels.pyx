# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels.

Bit-identical twin of `pykernels`: same counter-based draws (`_raw` mirrors
rng.raw), same Fisher-Yates swap sequence, and float accumulations in the
same left-to-right order as the fallback's cumsum / per-level loops.
"""

from libc.stdint cimport uint64_t, int64_t, int32_t, uint8_t, int8_t
from libc.math cimport fabs

import numpy as np


cdef inline uint64_t _mix64(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)


cdef inline uint64_t _raw(uint64_t key, uint64_t i) nogil:
    return _mix64((key ^ <uint64_t>0x5851F42D4C957F2D)
                  + (i + 1) * <uint64_t>0x9E3779B97F4A7C15)


cdef inline uint64_t _bounded(uint64_t u, uint64_t n) nogil:
    cdef uint64_t hi = u >> 32
    cdef uint64_t lo = u & <uint64_t>0xFFFFFFFF
    return (hi * n + ((lo * n) >> 32)) >> 32


def raw(key, i):
    """Scalar stream output; exposed for cross-backend RNG tests."""
    return int(_raw(<uint64_t>(int(key) & 0xFFFFFFFFFFFFFFFF), <uint64_t>int(i)))


def bounded(u, n):
    """Scalar bounded draw; exposed for cross-backend RNG tests."""
    return int(_bounded(<uint64_t>(int(u) & 0xFFFFFFFFFFFFFFFF), <uint64_t>int(n)))


def perm_count_numeric(const double[::1] x, const uint8_t[::1] mask, double mu,
                       double dev_obs, Py_ssize_t n_perm, key) -> int:
    """Count permutations with |sum(x over permuted small rows) - mu| >= dev_obs."""
    cdef uint64_t k64 = <uint64_t>(int(key) & 0xFFFFFFFFFFFFFFFF)
    cdef Py_ssize_t n = x.shape[0]
    cdef uint8_t[::1] buf = np.empty(n, dtype=np.uint8)
    cdef Py_ssize_t r, step, i, j
    cdef uint64_t base, u
    cdef uint8_t tmp
    cdef double t
    cdef int64_t hits = 0
    with nogil:
        for r in range(n_perm):
            for i in range(n):
                buf[i] = mask[i]
            base = <uint64_t>r * <uint64_t>(n - 1) if n > 1 else 0
            for step in range(n - 1):
                i = n - 1 - step
                u = _raw(k64, base + <uint64_t>step)
                j = <Py_ssize_t>_bounded(u, <uint64_t>(i + 1))
                tmp = buf[i]
                buf[i] = buf[j]
                buf[j] = tmp
            t = 0.0
            for i in range(n):
                t = t + x[i] * buf[i]
            if fabs(t - mu) >= dev_obs:
                hits += 1
    return int(hits)


def perm_count_categorical(const int32_t[::1] codes, Py_ssize_t k, const uint8_t[::1] mask,
                           double stat_obs, Py_ssize_t n_perm, key) -> int:
    """Count permutations with chi-square(level x permuted class) >= stat_obs."""
    cdef uint64_t k64 = <uint64_t>(int(key) & 0xFFFFFFFFFFFFFFFF)
    cdef Py_ssize_t n = codes.shape[0]
    cdef int64_t[::1] m = np.zeros(k, dtype=np.int64)
    cdef int64_t[::1] c = np.zeros(k, dtype=np.int64)
    cdef double[::1] es = np.zeros(k, dtype=np.float64)
    cdef double[::1] el = np.zeros(k, dtype=np.float64)
    cdef uint8_t[::1] buf = np.empty(n, dtype=np.uint8)
    cdef Py_ssize_t i, l, r, step, j
    cdef int64_t s = 0
    cdef uint64_t base, u
    cdef uint8_t tmp
    cdef double stat, d, a, term
    cdef int64_t hits = 0

    for i in range(n):
        m[codes[i]] += 1
        s += mask[i]
    for l in range(k):
        if m[l] > 0:
            es[l] = (<double>(m[l] * s)) / (<double>n)
            el[l] = (<double>(m[l] * (n - s))) / (<double>n)

    with nogil:
        for r in range(n_perm):
            for i in range(n):
                buf[i] = mask[i]
            base = <uint64_t>r * <uint64_t>(n - 1) if n > 1 else 0
            for step in range(n - 1):
                i = n - 1 - step
                u = _raw(k64, base + <uint64_t>step)
                j = <Py_ssize_t>_bounded(u, <uint64_t>(i + 1))
                tmp = buf[i]
                buf[i] = buf[j]
                buf[j] = tmp
            for l in range(k):
                c[l] = 0
            for i in range(n):
                c[codes[i]] += buf[i]
            stat = 0.0
            for l in range(k):
                if m[l] > 0:
                    d = (<double>c[l]) - es[l]
                    a = d * d
                    term = a / es[l] + a / el[l]
                    stat = stat + term
            if stat >= stat_obs:
                hits += 1
    return int(hits)


def route_arrays(const int8_t[::1] kind, const int32_t[::1] findex,
                 const double[::1] cut, const int32_t[::1] moff,
                 const int32_t[::1] left, const int32_t[::1] right,
                 const int32_t[::1] leaf_slot, const uint8_t[::1] memb,
                 const int32_t[:, ::1] cat_mat, const double[:, ::1] num_mat):
    """Route every row of (cat_mat, num_mat) to a leaf slot."""
    cdef Py_ssize_t n = cat_mat.shape[0]
    if num_mat.shape[0] > n:
        n = num_mat.shape[0]
    out = np.empty(n, dtype=np.int32)
    cdef int32_t[::1] ov = out
    cdef Py_ssize_t row
    cdef int32_t nid
    cdef int8_t kd
    with nogil:
        for row in range(n):
            nid = 0
            kd = kind[nid]
            while kd != 0:
                if kd == 1:
                    if memb[moff[nid] + cat_mat[row, findex[nid]]] == 1:
                        nid = left[nid]
                    else:
                        nid = right[nid]
                else:
                    if num_mat[row, findex[nid]] <= cut[nid]:
                        nid = left[nid]
                    else:
                        nid = right[nid]
                kd = kind[nid]
            ov[row] = leaf_slot[nid]
    return out
