# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Sobol' generation and inverse normal CDF.

Same contracts as ``_kernels_py``; selected by ``rqmc_sqn._backend``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport erfc, exp, log, sqrt
from libc.stdint cimport uint32_t, uint64_t

cnp.import_array()

cdef double TWO_M32 = 2.3283064365386963e-10
cdef double SQRT2PI = 2.5066282746310002
cdef double SQRT1_2 = 0.7071067811865476
cdef double P_LOW = 0.02425

cdef double A0 = -3.969683028665376e01, A1 = 2.209460984245205e02, A2 = -2.759285104469687e02
cdef double A3 = 1.383577518672690e02, A4 = -3.066479806614716e01, A5 = 2.506628277459239e00
cdef double B0 = -5.447609879822406e01, B1 = 1.615858368580409e02, B2 = -1.556989798598866e02
cdef double B3 = 6.680131188771972e01, B4 = -1.328068155288572e01
cdef double C0 = -7.784894002430293e-03, C1 = -3.223964580411365e-01, C2 = -2.400758277161838e00
cdef double C3 = -2.549732539343734e00, C4 = 4.374664141464968e00, C5 = 2.938163982698783e00
cdef double D0 = 7.784695709041462e-03, D1 = 3.224671290700398e-01, D2 = 2.445134137142996e00
cdef double D3 = 3.754408661907416e00


cdef inline int _ctz(uint64_t i) nogil:
    cdef int c = 0
    while (i & 1) == 0:
        i >>= 1
        c += 1
    return c


def sobol_block(dirs, shift, start, Py_ssize_t n):
    cdef uint32_t[:, ::1] dv = np.ascontiguousarray(dirs, dtype=np.uint32)
    cdef uint32_t[::1] sh = np.ascontiguousarray(shift, dtype=np.uint32)
    cdef Py_ssize_t s = dv.shape[0]
    cdef Py_ssize_t nbits = dv.shape[1]
    out_arr = np.empty((n, s), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    if n == 0:
        return out_arr
    cdef uint64_t first = <uint64_t>start
    cdef uint32_t[:, ::1] cum = np.empty((s, nbits), dtype=np.uint32)
    cdef uint32_t[::1] x = np.zeros(s, dtype=np.uint32)
    cdef Py_ssize_t j, b, i
    cdef uint32_t acc
    cdef uint64_t idx
    cdef int c
    with nogil:
        for j in range(s):
            acc = 0
            for b in range(nbits):
                acc ^= dv[j, b]
                cum[j, b] = acc
            # state for the first requested index
            acc = 0
            idx = first
            b = 0
            while idx:
                if idx & 1:
                    acc ^= dv[j, b]
                idx >>= 1
                b += 1
            x[j] = acc
            out[0, j] = (acc ^ sh[j]) * TWO_M32
        for i in range(1, n):
            # bits flipped between i-1 and i are 0..ctz(i)
            c = _ctz(first + <uint64_t>i)
            for j in range(s):
                x[j] ^= cum[j, c]
                out[i, j] = (x[j] ^ sh[j]) * TWO_M32
    return out_arr


cdef inline double _lower_half(double p) nogil:
    cdef double q, r, x, e, u
    if p < P_LOW:
        q = sqrt(-2.0 * log(p))
        x = (((((C0 * q + C1) * q + C2) * q + C3) * q + C4) * q + C5) / (
            (((D0 * q + D1) * q + D2) * q + D3) * q + 1.0)
    else:
        q = p - 0.5
        r = q * q
        x = (((((A0 * r + A1) * r + A2) * r + A3) * r + A4) * r + A5) * q / (
            ((((B0 * r + B1) * r + B2) * r + B3) * r + B4) * r + 1.0)
    e = 0.5 * erfc(-x * SQRT1_2) - p
    u = e * SQRT2PI * exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


def inv_normal_cdf(u):
    arr = np.ascontiguousarray(u, dtype=np.float64)
    shape = arr.shape
    cdef double[::1] flat = arr.reshape(-1)
    res = np.empty(flat.shape[0], dtype=np.float64)
    cdef double[::1] out = res
    cdef Py_ssize_t i, n = flat.shape[0]
    cdef double p
    with nogil:
        for i in range(n):
            p = flat[i]
            if p > 0.5:
                out[i] = -_lower_half(1.0 - p)
            else:
                out[i] = _lower_half(p)
    return res.reshape(shape)


def lms_scramble(dirs, lcols):
    cdef uint32_t[:, ::1] dv = np.ascontiguousarray(dirs, dtype=np.uint32)
    cdef uint32_t[:, ::1] lc = np.ascontiguousarray(lcols, dtype=np.uint32)
    cdef Py_ssize_t s = dv.shape[0], nb = dv.shape[1], j, b, c
    out_arr = np.zeros((s, nb), dtype=np.uint32)
    cdef uint32_t[:, ::1] out = out_arr
    cdef uint32_t v, acc
    with nogil:
        for j in range(s):
            for b in range(nb):
                v = dv[j, b]
                acc = 0
                for c in range(32):
                    if v & (<uint32_t>1 << (31 - c)):
                        acc ^= lc[j, c]
                out[j, b] = acc
    return out_arr
