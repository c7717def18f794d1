# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see ``_kernels_py`` for the reference semantics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport log2

cnp.import_array()

cdef enum:
    MAXK = 64


cdef double _comb(int n, int r) nogil:
    cdef double out = 1.0
    cdef int i
    if r < 0 or r > n:
        return 0.0
    for i in range(r):
        out = out * (n - i) / (i + 1)
    return out


def pb_pmf(q):
    cdef double[::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef Py_ssize_t n = qv.shape[0], i, x
    out = np.zeros(n + 1)
    cdef double[::1] p = out
    cdef double t
    p[0] = 1.0
    for i in range(n):
        t = qv[i]
        x = i + 1
        while x >= 1:
            p[x] = p[x] * (1.0 - t) + p[x - 1] * t
            x -= 1
        p[0] *= 1.0 - t
    return out


cdef void _row_pb(const long long[:, ::1] occ, Py_ssize_t s, const double[::1] r,
                  Py_ssize_t skip, double* p) nogil:
    # pmf of row s, omitting position `skip` (pass -1 to keep all)
    cdef Py_ssize_t k = occ.shape[1], i, x, n = 0
    cdef double t
    for x in range(k + 1):
        p[x] = 0.0
    p[0] = 1.0
    for i in range(k):
        if i == skip:
            continue
        t = r[occ[s, i]]
        x = n + 1
        while x >= 1:
            p[x] = p[x] * (1.0 - t) + p[x - 1] * t
            x -= 1
        p[0] *= 1.0 - t
        n += 1


def mixture_pb_pmf(occ, weights, r):
    cdef const long long[:, ::1] o = np.ascontiguousarray(occ, dtype=np.int64)
    cdef const double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef const double[::1] rv = np.ascontiguousarray(r, dtype=np.float64)
    cdef Py_ssize_t S = o.shape[0], k = o.shape[1], s, x
    if k + 1 > MAXK:
        raise ValueError("k too large for compiled kernel")
    out = np.zeros(k + 1)
    cdef double[::1] acc = out
    cdef double p[MAXK]
    with nogil:
        for s in range(S):
            _row_pb(o, s, rv, -1, p)
            for x in range(k + 1):
                acc[x] += w[s] * p[x]
    return out


def mixture_pb_grad(occ, weights, r, v):
    cdef const long long[:, ::1] o = np.ascontiguousarray(occ, dtype=np.int64)
    cdef const double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef const double[::1] rv = np.ascontiguousarray(r, dtype=np.float64)
    cdef const double[::1] vv = np.ascontiguousarray(v, dtype=np.float64)
    cdef Py_ssize_t S = o.shape[0], k = o.shape[1], s, i, y
    if k + 1 > MAXK:
        raise ValueError("k too large for compiled kernel")
    out = np.zeros(rv.shape[0])
    cdef double[::1] g = out
    cdef double p[MAXK]
    cdef double acc
    with nogil:
        for s in range(S):
            for i in range(k):
                _row_pb(o, s, rv, i, p)
                acc = 0.0
                for y in range(k):
                    acc += p[y] * (vv[y + 1] - vv[y])
                g[o[s, i]] += w[s] * acc
    return out


cdef double _poly_entropy(const double* coeffs, int deg, int k, double t) nogil:
    cdef double h = 0.0, px
    cdef int j, x
    for x in range(k + 1):
        px = 0.0
        j = deg
        while j >= 0:
            px = px * t + coeffs[j * (k + 1) + x]
            j -= 1
        if px > 1e-300:
            h -= px * log2(px)
    return h


def coordinate_sweep(occ, weights, double[::1] r, maxmult, int resolution, int levels):
    cdef const long long[:, ::1] o = np.ascontiguousarray(occ, dtype=np.int64)
    cdef const double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef const long long[::1] mm = np.ascontiguousarray(maxmult, dtype=np.int64)
    cdef Py_ssize_t S = o.shape[0], k = o.shape[1], L = r.shape[0]
    cdef Py_ssize_t c, s, i, x, n, j, q, g
    cdef int deg, m, lev
    cdef double t, coef, sign, best_t, best_h, h, lo, hi, step, conv
    cdef double rest[MAXK]
    cdef double coeffs[MAXK * MAXK]
    if k + 1 > MAXK:
        raise ValueError("k too large for compiled kernel")
    with nogil:
        for c in range(L):
            deg = <int>mm[c]
            if deg == 0:
                continue
            for x in range((deg + 1) * (k + 1)):
                coeffs[x] = 0.0
            for s in range(S):
                for x in range(k + 1):
                    rest[x] = 0.0
                rest[0] = 1.0
                n = 0
                m = 0
                for i in range(k):
                    if o[s, i] == c:
                        m += 1
                        continue
                    t = r[o[s, i]]
                    x = n + 1
                    while x >= 1:
                        rest[x] = rest[x] * (1.0 - t) + rest[x - 1] * t
                        x -= 1
                    rest[0] *= 1.0 - t
                    n += 1
                for j in range(m + 1):
                    coef = w[s] * _comb(m, <int>j)
                    for x in range(k + 1):
                        conv = 0.0
                        for q in range(j + 1):
                            if q > x:
                                break
                            sign = _comb(<int>j, <int>q)
                            if (j - q) % 2 == 1:
                                sign = -sign
                            conv += sign * rest[x - q]
                        coeffs[j * (k + 1) + x] += coef * conv
            best_t = r[c]
            best_h = _poly_entropy(coeffs, deg, <int>k, best_t)
            lo = 0.0
            hi = 1.0
            for lev in range(levels):
                step = (hi - lo) / (resolution - 1)
                for g in range(resolution):
                    t = lo + step * g
                    h = _poly_entropy(coeffs, deg, <int>k, t)
                    if h > best_h:
                        best_h = h
                        best_t = t
                lo = best_t - step
                if lo < 0.0:
                    lo = 0.0
                hi = best_t + step
                if hi > 1.0:
                    hi = 1.0
            r[c] = best_t
    return np.asarray(r)
