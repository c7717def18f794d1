"""Pure numpy implementations of the hot kernels.

Same algorithms and signatures as the compiled ``_kernels`` extension; used
when the extension is not built or ``SUMTEST_PURE_PYTHON`` is set.
"""

import math

import numpy as np


def pb_pmf(q):
    q = np.asarray(q, dtype=np.float64)
    pmf = np.zeros(q.size + 1)
    pmf[0] = 1.0
    for n, t in enumerate(q):
        pmf[1 : n + 2] = pmf[1 : n + 2] * (1.0 - t) + pmf[: n + 1] * t
        pmf[0] *= 1.0 - t
    return pmf


def _rows_pb(occ, r):
    s, k = occ.shape
    pmf = np.zeros((s, k + 1))
    pmf[:, 0] = 1.0
    for i in range(k):
        t = r[occ[:, i]][:, None]
        pmf[:, 1 : i + 2] = pmf[:, 1 : i + 2] * (1.0 - t) + pmf[:, : i + 1] * t
        pmf[:, :1] *= 1.0 - t
    return pmf


def mixture_pb_pmf(occ, weights, r):
    """``sum_s weights[s] * PB(r[occ[s, 0]], ..., r[occ[s, k-1]])``."""
    occ = np.asarray(occ, dtype=np.int64)
    return np.asarray(weights, dtype=np.float64) @ _rows_pb(occ, np.asarray(r, dtype=np.float64))


def mixture_pb_grad(occ, weights, r, v):
    """Gradient in ``r`` of ``sum_x v[x] * mixture_pb_pmf(occ, weights, r)[x]``."""
    occ = np.asarray(occ, dtype=np.int64)
    r = np.asarray(r, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    s, k = occ.shape
    grad = np.zeros(r.size)
    dv = v[1:] - v[:-1]
    for i in range(k):
        rest = np.delete(occ, i, axis=1)
        loo = _rows_pb(rest, r) if k > 1 else np.ones((s, 1))
        contrib = weights * (loo @ dv)
        np.add.at(grad, occ[:, i], contrib)
    return grad


def _entropy_rows(p):
    p = np.clip(p, 0.0, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 1e-300, p * np.log2(np.where(p > 1e-300, p, 1.0)), 0.0)
    return -terms.sum(axis=-1)


def coordinate_sweep(occ, weights, r, maxmult, resolution, levels):
    """One pass of coordinate ascent on the mixture entropy; updates ``r`` in place.

    Along coordinate ``c`` the mixture pmf is a polynomial in ``r[c]`` of degree
    ``maxmult[c]``; its coefficients are formed exactly and the entropy is
    maximized by a grid search that is refined ``levels`` times.
    """
    occ = np.asarray(occ, dtype=np.int64)
    weights = np.asarray(weights, dtype=np.float64)
    s, k = occ.shape
    for c in range(r.size):
        deg = int(maxmult[c])
        if deg == 0:
            continue
        rest = np.zeros((s, k + 1))
        rest[:, 0] = 1.0
        mult = np.zeros(s, dtype=np.int64)
        for i in range(k):
            col = occ[:, i]
            hit = col == c
            t = np.where(hit, 0.0, r[col])[:, None]
            shifted = np.zeros_like(rest)
            shifted[:, 1:] = rest[:, :-1]
            upd = rest * (1.0 - t) + shifted * t
            rest = np.where(hit[:, None], rest, upd)
            mult += hit
        coeffs = np.zeros((deg + 1, k + 1))
        for j in range(deg + 1):
            rows = mult >= j
            if not rows.any():
                continue
            binom_m = np.array([math.comb(int(m), j) for m in mult[rows]], dtype=np.float64)
            conv = np.zeros((int(rows.sum()), k + 1))
            base = rest[rows]
            for i in range(j + 1):
                sign = math.comb(j, i) * (-1.0) ** (j - i)
                conv[:, i:] += sign * base[:, : k + 1 - i]
            coeffs[j] = (weights[rows] * binom_m) @ conv

        def ent(t):
            t = np.atleast_1d(t)
            p = np.zeros((t.size, k + 1))
            for j in range(deg, -1, -1):
                p = p * t[:, None] + coeffs[j]
            return _entropy_rows(p)

        best_t = float(r[c])
        best_h = float(ent(best_t)[0])
        lo, hi = 0.0, 1.0
        for _ in range(levels):
            step = (hi - lo) / (resolution - 1)
            grid = lo + step * np.arange(resolution)
            h = ent(grid)
            j = int(np.argmax(h))
            if h[j] > best_h:
                best_h, best_t = float(h[j]), float(grid[j])
            lo, hi = max(0.0, best_t - step), min(1.0, best_t + step)
        r[c] = best_t
    return r
