"""Interval-set algebra and piecewise-constant priors on the real line.

All sets are finite unions of half-open intervals ``(lo, hi]``.  Endpoints
closer than :data:`TOL` are merged, and intervals shorter than :data:`TOL`
are dropped.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

TOL = 1e-12


def _normalize(lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    keep = hi - lo > TOL
    lo, hi = lo[keep], hi[keep]
    if lo.size == 0:
        return np.empty(0), np.empty(0)
    order = np.argsort(lo, kind="stable")
    lo, hi = lo[order], hi[order]
    reach = np.maximum.accumulate(hi)
    starts = np.empty(lo.size, dtype=bool)
    starts[0] = True
    starts[1:] = lo[1:] > reach[:-1] + TOL
    group = np.cumsum(starts) - 1
    out_lo = lo[starts]
    out_hi = np.full(out_lo.size, -np.inf)
    np.maximum.at(out_hi, group, hi)
    return out_lo, out_hi


def clip_pieces(
    lo: np.ndarray, hi: np.ndarray, q_lo: np.ndarray, q_hi: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Intersect each interval ``(lo[i], hi[i]]`` with the sorted disjoint set ``q``.

    Returns ``(piece_lo, piece_hi, source)`` where ``source[j]`` is the index
    of the input interval that piece ``j`` came from.  Pieces shorter than
    :data:`TOL` are dropped.
    """
    p_lo, p_hi, source, _ = clip_pieces_indexed(lo, hi, q_lo, q_hi)
    return p_lo, p_hi, source


def clip_pieces_indexed(lo, hi, q_lo, q_hi):
    """Like :func:`clip_pieces`, also returning the index into ``q`` of each piece."""
    first = np.searchsorted(q_hi, lo, side="right")
    last = np.searchsorted(q_lo, hi, side="left")
    counts = np.maximum(last - first, 0)
    source = np.repeat(np.arange(lo.size), counts)
    if source.size == 0:
        return np.empty(0), np.empty(0), source, source
    offsets = np.arange(source.size) - np.repeat(np.cumsum(counts) - counts, counts)
    j = first[source] + offsets
    p_lo = np.maximum(lo[source], q_lo[j])
    p_hi = np.minimum(hi[source], q_hi[j])
    keep = p_hi - p_lo > TOL
    return p_lo[keep], p_hi[keep], source[keep], j[keep]


class IntervalSet:
    """A normalized finite disjoint union of half-open intervals ``(lo, hi]``."""

    __slots__ = ("lo", "hi", "_comp", "_cover")

    def __init__(self, intervals: Iterable[tuple[float, float]] = ()):
        pairs = [(float(a), float(b)) for a, b in intervals]
        for a, b in pairs:
            if not a < b:
                raise ValueError(f"interval ({a}, {b}] must have lo < hi")
        lo = np.array([a for a, _ in pairs], dtype=float)
        hi = np.array([b for _, b in pairs], dtype=float)
        self._set(*_normalize(lo, hi))

    def _set(self, lo: np.ndarray, hi: np.ndarray) -> None:
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "_comp", None)
        object.__setattr__(self, "_cover", None)

    @classmethod
    def from_arrays(cls, lo, hi) -> "IntervalSet":
        obj = cls.__new__(cls)
        lo = np.asarray(lo, dtype=float).copy()
        hi = np.asarray(hi, dtype=float).copy()
        if np.any(hi < lo):
            raise ValueError("interval endpoints must satisfy lo <= hi")
        obj._set(*_normalize(lo, hi))
        return obj

    @classmethod
    def empty(cls) -> "IntervalSet":
        return cls.from_arrays([], [])

    def __setattr__(self, name, value):
        raise AttributeError("IntervalSet is immutable")

    def __reduce__(self):
        return (IntervalSet.from_arrays, (np.array(self.lo), np.array(self.hi)))

    def __len__(self) -> int:
        return int(self.lo.size)

    def __iter__(self) -> Iterator[tuple[float, float]]:
        return zip(self.lo.tolist(), self.hi.tolist())

    def __bool__(self) -> bool:
        return self.lo.size > 0

    def __repr__(self) -> str:
        if not self:
            return "IntervalSet(∅)"
        body = " ∪ ".join(f"({a:.6g}, {b:.6g}]" for a, b in self)
        return f"IntervalSet({body})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, IntervalSet):
            return NotImplemented
        return len(self) == len(other) and bool(
            np.all(np.abs(self.lo - other.lo) <= TOL) and np.all(np.abs(self.hi - other.hi) <= TOL)
        )

    def __hash__(self):
        return hash((tuple(np.round(self.lo, 10)), tuple(np.round(self.hi, 10))))

    @property
    def length(self) -> float:
        return float(np.sum(self.hi - self.lo))

    def contains(self, x):
        """Vectorized membership test for the half-open convention."""
        x = np.asarray(x, dtype=float)
        i = np.searchsorted(self.lo, x, side="left") - 1
        ok = i >= 0
        inside = np.zeros(x.shape, dtype=bool)
        inside[ok] = x[ok] <= self.hi[i[ok]]
        return inside

    def complement(self) -> "IntervalSet":
        """Complement in the whole real line."""
        if self._comp is not None:
            return self._comp
        lo = np.concatenate(([-np.inf], self.hi))
        hi = np.concatenate((self.lo, [np.inf]))
        obj = IntervalSet.__new__(IntervalSet)
        keep = hi > lo
        obj._set(lo[keep].copy(), hi[keep].copy())
        object.__setattr__(self, "_comp", obj)
        return obj

    def cover(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """The real line cut at this set's endpoints: ``(lo, hi, inside)``, sorted."""
        if self._cover is not None:
            return self._cover
        n = self.lo.size
        edges = np.empty(2 * n + 2)
        edges[0], edges[-1] = -np.inf, np.inf
        edges[1:-1:2], edges[2:-1:2] = self.lo, self.hi
        inside = np.zeros(2 * n + 1, dtype=np.int64)
        inside[1::2] = 1
        keep = edges[1:] > edges[:-1]
        out = (edges[:-1][keep], edges[1:][keep], inside[keep])
        for a in out:
            a.flags.writeable = False
        object.__setattr__(self, "_cover", out)
        return out

    def union(self, other: "IntervalSet") -> "IntervalSet":
        return union(self, other)

    def intersect(self, other: "IntervalSet") -> "IntervalSet":
        return intersect(self, other)

    def difference(self, other: "IntervalSet") -> "IntervalSet":
        return intersect(self, other.complement())

    def issubset(self, other: "IntervalSet") -> bool:
        return abs(intersect(self, other).length - self.length) <= TOL * max(1, len(self))

    def to_list(self) -> list[list[float]]:
        return [[a, b] for a, b in self]


def union(a: IntervalSet, b: IntervalSet) -> IntervalSet:
    return IntervalSet.from_arrays(np.concatenate((a.lo, b.lo)), np.concatenate((a.hi, b.hi)))


def intersect(a: IntervalSet, b: IntervalSet) -> IntervalSet:
    lo, hi, _ = clip_pieces(a.lo, a.hi, b.lo, b.hi)
    return IntervalSet.from_arrays(lo, hi)


def complement_within(a: IntervalSet, universe: IntervalSet) -> IntervalSet:
    """``universe \\ a``; ``a`` must be a subset of ``universe``."""
    if not a.issubset(universe):
        raise ValueError("set is not contained in the universe")
    return intersect(universe, a.complement())


class Prior:
    """Piecewise-constant density: ``densities[i]`` on ``(breakpoints[i], breakpoints[i+1]]``."""

    def __init__(self, breakpoints: Sequence[float], densities: Sequence[float]):
        b = np.asarray(breakpoints, dtype=float)
        d = np.asarray(densities, dtype=float)
        if b.ndim != 1 or d.ndim != 1 or b.size != d.size + 1 or d.size == 0:
            raise ValueError("need m+1 breakpoints for m densities (m >= 1)")
        if not np.all(np.isfinite(b)) or np.any(np.diff(b) <= 0):
            raise ValueError("breakpoints must be finite and strictly increasing")
        if np.any(d < 0) or not np.all(np.isfinite(d)):
            raise ValueError("densities must be finite and nonnegative")
        total = float(np.sum(d * np.diff(b)))
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"density integrates to {total!r}, not 1")
        b.flags.writeable = False
        d.flags.writeable = False
        self.breakpoints = b
        self.densities = d
        self.density_sup = float(d.max())
        cum = np.concatenate(([0.0], np.cumsum(d * np.diff(b))))
        cum[-1] = 1.0
        self._cum = cum
        plogp = np.where(d > 0, d * np.log2(np.where(d > 0, d, 1.0)), 0.0)
        self._cum_plogp = np.concatenate(([0.0], np.cumsum(plogp * np.diff(b))))
        pos = d > 0
        self.support = IntervalSet.from_arrays(b[:-1][pos], b[1:][pos])

    @classmethod
    def uniform(cls, lo: float = 0.0, hi: float = 1.0) -> "Prior":
        return cls([lo, hi], [1.0 / (hi - lo)])

    def __repr__(self) -> str:
        return f"Prior(breakpoints={self.breakpoints.tolist()}, densities={self.densities.tolist()})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, Prior):
            return NotImplemented
        return np.array_equal(self.breakpoints, other.breakpoints) and np.array_equal(
            self.densities, other.densities
        )

    def __hash__(self):
        return hash((self.breakpoints.tobytes(), self.densities.tobytes()))

    @property
    def is_uniform(self) -> bool:
        return bool(np.all(self.densities[self.densities > 0] == self.density_sup))

    def density(self, u):
        u = np.asarray(u, dtype=float)
        i = np.searchsorted(self.breakpoints, u, side="left") - 1
        inside = (i >= 0) & (i < self.densities.size)
        out = np.zeros(u.shape)
        out[inside] = self.densities[i[inside]]
        return out

    def cdf(self, u):
        return np.interp(u, self.breakpoints, self._cum)

    def plogp_integral(self, u):
        """``∫_{-inf}^u f0 log2 f0``."""
        return np.interp(u, self.breakpoints, self._cum_plogp)

    def quantile(self, q):
        """``Q(q) = inf{u : q <= F0(u)}``, with ``Q(0)`` the left edge of the support."""
        q = np.asarray(q, dtype=float)
        if np.any((q < 0) | (q > 1)) or np.any(np.isnan(q)):
            raise ValueError("quantile level must lie in [0, 1]")
        i = np.searchsorted(self._cum[1:], q, side="left")
        i = np.minimum(i, self.densities.size - 1)
        d = self.densities[i]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = self.breakpoints[i] + np.where(d > 0, (q - self._cum[i]) / d, 0.0)
        u = np.minimum(u, self.breakpoints[i + 1])
        u = np.where(q <= 0, self.support.lo[0], u)
        return u if u.ndim else float(u)

    def mass_arrays(self, lo, hi):
        return self.cdf(hi) - self.cdf(lo)

    def plogp_arrays(self, lo, hi):
        return self.plogp_integral(hi) - self.plogp_integral(lo)

    @property
    def entropy_bits(self) -> float:
        """Differential entropy of one coordinate, in bits."""
        return -float(self._cum_plogp[-1])

    def to_dict(self) -> dict:
        return {
            "type": "piecewise",
            "breakpoints": self.breakpoints.tolist(),
            "densities": self.densities.tolist(),
        }


def mass(p: Prior, s: IntervalSet) -> float:
    return float(np.sum(p.mass_arrays(s.lo, s.hi)))


def quantile(p: Prior, q: float) -> float:
    return p.quantile(q)


def mass_prefix(p: Prior, cell: IntervalSet, r: float) -> IntervalSet:
    """Leftmost part of ``cell`` carrying a fraction ``r`` of its prior mass."""
    if not 0.0 <= r <= 1.0:
        raise ValueError("fraction must lie in [0, 1]")
    masses = p.mass_arrays(cell.lo, cell.hi)
    total = float(masses.sum())
    if total <= 0:
        raise ValueError("cell has zero prior mass")
    if r == 0.0:
        return IntervalSet.empty()
    if r == 1.0:
        return cell
    target = r * total
    before = np.concatenate(([0.0], np.cumsum(masses)[:-1]))
    i = int(np.searchsorted(before + masses, target, side="left"))
    i = min(i, len(cell) - 1)
    remaining = target - before[i]
    lo_i = cell.lo[i]
    cut = float(p.quantile(min(1.0, float(p.cdf(lo_i)) + remaining)))
    cut = min(max(cut, lo_i), cell.hi[i])
    lo = np.concatenate((cell.lo[:i], [lo_i]))
    hi = np.concatenate((cell.hi[:i], [cut]))
    return IntervalSet.from_arrays(lo, hi)


def prior_from_dict(cfg: dict) -> Prior:
    """Build a prior from its JSON form, rescaling total mass only within 1e-9."""
    if not isinstance(cfg, dict):
        raise ValueError("prior config must be a JSON object")
    kind = cfg.get("type")
    if kind == "uniform":
        extra = set(cfg) - {"type", "lo", "hi"}
        if extra:
            raise ValueError(f"unknown prior fields: {sorted(extra)}")
        lo, hi = float(cfg.get("lo", 0.0)), float(cfg.get("hi", 1.0))
        if not lo < hi:
            raise ValueError("uniform prior needs lo < hi")
        return Prior.uniform(lo, hi)
    if kind == "piecewise":
        extra = set(cfg) - {"type", "breakpoints", "densities"}
        if extra:
            raise ValueError(f"unknown prior fields: {sorted(extra)}")
        b = np.asarray(cfg["breakpoints"], dtype=float)
        d = np.asarray(cfg["densities"], dtype=float)
        if b.size != d.size + 1:
            raise ValueError("need m+1 breakpoints for m densities")
        total = float(np.sum(d * np.diff(b)))
        if not math.isfinite(total) or abs(total - 1.0) > 1e-9:
            raise ValueError(f"prior mass {total!r} differs from 1 by more than 1e-9")
        return Prior(b, d / total)
    raise ValueError(f"unknown prior type {kind!r}")


def load_prior(path: str | Path) -> Prior:
    with open(path) as fh:
        return prior_from_dict(json.load(fh))
