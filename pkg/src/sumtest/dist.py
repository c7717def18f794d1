"""Distributions on ``{0, ..., k}``: Binomial, Poisson-Binomial and mixtures.

Entropies are in bits throughout.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Sequence

import numpy as np

from sumtest import kernels

# pmf entries below this are treated as zero inside entropy sums
PMF_FLOOR = 1e-300


class DiscreteDist:
    """A probability mass function on ``{0, ..., k}``."""

    __slots__ = ("pmf",)

    def __init__(self, pmf: Sequence[float]):
        p = np.array(pmf, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("pmf must be a non-empty vector")
        if np.any(p < -1e-15) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("pmf must be nonnegative and sum to 1")
        p = np.clip(p, 0.0, None)
        p.flags.writeable = False
        self.pmf = p

    @classmethod
    def _trusted(cls, pmf: np.ndarray) -> "DiscreteDist":
        """Wrap a pmf already known to be valid, skipping the checks."""
        obj = cls.__new__(cls)
        pmf.flags.writeable = False
        obj.pmf = pmf
        return obj

    @property
    def k(self) -> int:
        return self.pmf.size - 1

    @property
    def mean(self) -> float:
        return float(np.dot(np.arange(self.pmf.size), self.pmf))

    @property
    def variance(self) -> float:
        x = np.arange(self.pmf.size)
        return float(np.dot(x * x, self.pmf) - self.mean ** 2)

    @property
    def entropy(self) -> float:
        return entropy_bits(self)

    def __repr__(self) -> str:
        return f"DiscreteDist({np.array2string(self.pmf, precision=6)})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, DiscreteDist):
            return NotImplemented
        return self.pmf.size == other.pmf.size and bool(np.allclose(self.pmf, other.pmf, rtol=0, atol=1e-12))


def _check_probs(q) -> np.ndarray:
    q = np.asarray(q, dtype=float).ravel()
    if np.any((q < 0) | (q > 1)) or np.any(np.isnan(q)):
        raise ValueError("Bernoulli parameters must lie in [0, 1]")
    return q


def poisson_binomial(q: Sequence[float]) -> DiscreteDist:
    """Distribution of a sum of independent Bernoulli(q_i), by sequential convolution."""
    return DiscreteDist(kernels.pb_pmf(_check_probs(q)))


def binomial(k: int, p: float) -> DiscreteDist:
    if k < 0:
        raise ValueError("k must be nonnegative")
    return poisson_binomial(np.full(k, float(p)))


def pmf_entropy(p) -> float:
    p = np.asarray(p, dtype=float)
    p = p[p > PMF_FLOOR]
    return float(-np.sum(p * np.log2(p)))


def entropy_bits(d: DiscreteDist) -> float:
    return pmf_entropy(d.pmf)


def mixture(weights: Sequence[float], comps: Sequence[DiscreteDist]) -> DiscreteDist:
    w = np.asarray(weights, dtype=float)
    if len(comps) == 0 or w.size != len(comps):
        raise ValueError("need one weight per component")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise ValueError("weights must be nonnegative and sum to 1")
    ks = {c.k for c in comps}
    if len(ks) != 1:
        raise ValueError("all components must share the same k")
    return DiscreteDist(w @ np.stack([c.pmf for c in comps]))


@lru_cache(maxsize=None)
def binomial_half_entropy(k: int) -> float:
    """``H(Bin(k, 1/2))`` by direct summation over the closed-form pmf."""
    return pmf_entropy([math.comb(k, x) / 2.0 ** k for x in range(k + 1)])


def log_binomial_coeff_variance(k: int) -> float:
    """Variance of ``log2 C(k, X)`` for ``X ~ Bin(k, 1/2)``."""
    if k < 1:
        raise ValueError("k must be at least 1")
    p = np.array([math.comb(k, x) / 2.0 ** k for x in range(k + 1)])
    v = np.array([math.log2(math.comb(k, x)) for x in range(k + 1)])
    m = float(p @ v)
    return float(p @ (v - m) ** 2)
