"""Exact posterior over object locations after a history of sum observations.

The posterior is kept in exchangeable form: a partition of the support into
cells (each tagged with the bit code of the questions containing it) and a
weighted list of *occupancy rows*.  A row is the sorted tuple of cell indices
of the ``k`` objects, i.e. a count vector over cells written as a multiset.
Its weight is proportional to ``k!/prod(m_c!) * prod(mass_c ** m_c)``, which
aggregates all labelled codeword matrices sharing the same counts.

Cells that no row can occupy carry no posterior mass; they are folded into
``dead`` so that live cells plus ``dead`` still cover the support.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from sumtest import kernels
from sumtest.dist import DiscreteDist
from sumtest.measure import IntervalSet, Prior, clip_pieces_indexed


class InconsistentAnswer(ValueError):
    """No configuration of the objects agrees with every answer so far."""


@dataclass(frozen=True)
class QuestionHistory:
    k: int
    questions: tuple[IntervalSet, ...] = ()
    answers: tuple[int, ...] = ()

    def __post_init__(self):
        if len(self.questions) != len(self.answers):
            raise ValueError("questions and answers must have equal length")
        if any(not 0 <= x <= self.k for x in self.answers):
            raise ValueError("answers must lie in {0..k}")

    def __len__(self):
        return len(self.answers)

    def extended(self, question: IntervalSet, answer: int) -> "QuestionHistory":
        return QuestionHistory(self.k, self.questions + (question,), self.answers + (int(answer),))


@lru_cache(maxsize=None)
def _masks(k: int, x: int) -> np.ndarray:
    """Boolean rows: every way to pick ``x`` of ``k`` positions."""
    rows = [[i in combo for i in range(k)] for combo in itertools.combinations(range(k), x)]
    return np.array(rows, dtype=bool).reshape(-1, k)


@lru_cache(maxsize=None)
def _mult_factorial_table(k: int) -> np.ndarray:
    """``sum log2(m!)`` indexed by the bit pattern of equal neighbours in a sorted row."""
    out = np.zeros(2 ** (k - 1))
    for pattern in range(out.size):
        run = 0
        for i in range(k - 1):
            run = run + 1 if pattern >> i & 1 else 0
            out[pattern] += math.log2(run + 1)
    return out


def _log2_mult_factorials(occ: np.ndarray) -> np.ndarray:
    """``sum_c log2(m_c!)`` for each sorted occupancy row."""
    s, k = occ.shape
    if k == 1:
        return np.zeros(s)
    same = (occ[:, 1:] == occ[:, :-1]).astype(np.int64)
    if k <= 16:
        return _mult_factorial_table(k)[same @ (1 << np.arange(k - 1))]
    out = np.zeros(s)
    run = np.zeros(s, dtype=np.int64)
    table = np.log2(np.arange(1, k + 1))
    for i in range(k - 1):
        run = np.where(same[:, i] == 1, run + 1, 0)
        out += table[run]
    return out


def _unique_rows(rows: np.ndarray, base: int) -> np.ndarray:
    """Distinct rows in lexicographic order; entries lie in ``0..base-1``."""
    n, k = rows.shape
    if k * math.log2(max(base, 2)) >= 62:
        return np.unique(rows, axis=0)
    key = rows @ (base ** np.arange(k - 1, -1, -1, dtype=np.int64))
    _, first = np.unique(key, return_index=True)
    return rows[first]


def _log2_factorial(k: int) -> float:
    return math.lgamma(k + 1) / math.log(2)


@dataclass(frozen=True, eq=False)
class PosteriorState:
    prior: Prior
    history: QuestionHistory
    codes: tuple[str, ...]
    iv_lo: np.ndarray
    iv_hi: np.ndarray
    iv_cell: np.ndarray
    cell_mass: np.ndarray
    cell_plogp: np.ndarray
    occ: np.ndarray
    weights: np.ndarray
    log2_norm: float
    dead: IntervalSet = field(default_factory=IntervalSet.empty)
    # answer-independent split of the cells by recent questions, keyed by id()
    _splits: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    @classmethod
    def initial(cls, prior: Prior, k: int) -> "PosteriorState":
        if k < 1:
            raise ValueError("k must be at least 1")
        sup = prior.support
        return cls(
            prior=prior,
            history=QuestionHistory(k),
            codes=("",),
            iv_lo=sup.lo.copy(),
            iv_hi=sup.hi.copy(),
            iv_cell=np.zeros(len(sup), dtype=np.int64),
            cell_mass=np.array([1.0]),
            cell_plogp=np.array([float(np.sum(prior.plogp_arrays(sup.lo, sup.hi)))]),
            occ=np.zeros((1, k), dtype=np.int64),
            weights=np.array([1.0]),
            log2_norm=0.0,
        )

    @property
    def k(self) -> int:
        return self.history.k

    @property
    def n(self) -> int:
        return len(self.history)

    @property
    def n_cells(self) -> int:
        return len(self.codes)

    def cell_region(self, i: int) -> IntervalSet:
        sel = self.iv_cell == i
        return IntervalSet.from_arrays(self.iv_lo[sel], self.iv_hi[sel])

    @property
    def cells(self) -> list[tuple[str, IntervalSet, float]]:
        return [(code, self.cell_region(i), float(self.cell_mass[i])) for i, code in enumerate(self.codes)]

    def max_multiplicity(self) -> np.ndarray:
        out = np.zeros(self.n_cells, dtype=np.int64)
        for c in range(self.n_cells):
            np.maximum(out[c], (self.occ == c).sum(axis=1).max(), out=out[c : c + 1])
        return out

    def count_vectors(self) -> list[tuple[tuple[int, ...], float]]:
        """Support as ``(counts per cell, weight)`` pairs."""
        out = []
        for row, w in zip(self.occ, self.weights):
            counts = np.bincount(row, minlength=self.n_cells)
            out.append((tuple(int(c) for c in counts), float(w)))
        return out

    def fractions(self, question: IntervalSet) -> np.ndarray:
        """``mass(question ∩ cell) / mass(cell)`` for every live cell."""
        child_mass = _split(self, question).child_mass
        return np.clip(child_mass[1::2] / self.cell_mass, 0.0, 1.0)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "n": self.n,
            "answers": list(self.history.answers),
            "questions": [q.to_list() for q in self.history.questions],
            "cells": [
                {"code": code, "mass": mass, "region": region.to_list()}
                for code, region, mass in self.cells
            ],
            "dead": self.dead.to_list(),
            "support": [
                {"cells": [int(c) for c in row], "weight": float(w)} for row, w in zip(self.occ, self.weights)
            ],
            "log2_norm": self.log2_norm,
        }

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


@dataclass(frozen=True)
class _Split:
    lo: np.ndarray
    hi: np.ndarray
    tmp: np.ndarray  # 2c for the part of cell c outside the question, 2c+1 inside
    child_mass: np.ndarray
    child_plogp: np.ndarray


def _split(state: PosteriorState, question: IntervalSet) -> _Split:
    hit = state._splits.get(id(question))
    if hit is not None and hit[0] is question:
        return hit[1]
    cut_lo, cut_hi, cut_in = question.cover()
    lo, hi, src, j = clip_pieces_indexed(state.iv_lo, state.iv_hi, cut_lo, cut_hi)
    tmp = 2 * state.iv_cell[src] + cut_in[j]
    n = 2 * state.n_cells
    out = _Split(
        lo, hi, tmp,
        np.bincount(tmp, state.prior.mass_arrays(lo, hi), minlength=n),
        np.bincount(tmp, state.prior.plogp_arrays(lo, hi), minlength=n),
    )
    if len(state._splits) >= 4:
        state._splits.clear()
    state._splits[id(question)] = (question, out)
    return out


def refine(state: PosteriorState, question: IntervalSet, answer: int) -> PosteriorState:
    """Condition on ``answer`` objects lying in ``question``."""
    k = state.k
    answer = int(answer)
    if not 0 <= answer <= k:
        raise ValueError(f"answer {answer} outside 0..{k}")
    prior = state.prior
    L = state.n_cells

    sp = _split(state, question)
    lo, hi, tmp, child_mass = sp.lo, sp.hi, sp.tmp, sp.child_mass
    exists = child_mass > 0

    child = (2 * state.occ[:, None, :] + _masks(k, answer)[None, :, :]).reshape(-1, k)
    child = child[exists[child].all(axis=1)]
    if child.shape[0] == 0:
        raise InconsistentAnswer(f"no configuration is consistent with answer {answer}")
    new_occ = _unique_rows(np.sort(child, axis=1), 2 * L)

    live = np.flatnonzero(np.bincount(new_occ.ravel(), minlength=2 * L))
    relabel = np.full(2 * L, -1, dtype=np.int64)
    relabel[live] = np.arange(live.size)
    new_occ = relabel[new_occ]
    new_mass = child_mass[live]

    codes = tuple(state.codes[t // 2] + ("1" if t % 2 else "0") for t in live.tolist())
    # pieces come out of the clip already sorted by position
    keep = relabel[tmp] >= 0
    dead = state.dead
    if not keep.all():
        dead = IntervalSet.from_arrays(
            np.concatenate((dead.lo, lo[~keep])), np.concatenate((dead.hi, hi[~keep]))
        )

    log2w = _log2_factorial(k) - _log2_mult_factorials(new_occ) + np.log2(new_mass)[new_occ].sum(axis=1)
    top = log2w.max()
    raw = np.exp2(log2w - top)
    total = raw.sum()
    return PosteriorState(
        prior=prior,
        history=state.history.extended(question, answer),
        codes=codes,
        iv_lo=lo[keep],
        iv_hi=hi[keep],
        iv_cell=relabel[tmp[keep]],
        cell_mass=new_mass,
        cell_plogp=sp.child_plogp[live],
        occ=new_occ,
        weights=raw / total,
        log2_norm=float(top + math.log2(total)),
        dead=dead,
    )


def refine_all(state: PosteriorState, questions, answers) -> PosteriorState:
    for q, x in zip(questions, answers):
        state = refine(state, q, x)
    return state


def predictive(state: PosteriorState, question: IntervalSet) -> DiscreteDist:
    """Distribution of the next answer: a mixture of Poisson-Binomials."""
    return predictive_from_fractions(state, state.fractions(question))


def predictive_from_fractions(state: PosteriorState, r: np.ndarray) -> DiscreteDist:
    pmf = np.clip(kernels.mixture_pb_pmf(state.occ, state.weights, np.asarray(r, dtype=float)), 0.0, None)
    return DiscreteDist._trusted(pmf / pmf.sum())


def entropy_terms(state: PosteriorState) -> tuple[float, float]:
    """``(log2 p0(consistent region), -E[log2 p0(theta)])`` under the posterior."""
    per_object = state.cell_plogp / state.cell_mass
    i2 = -float(state.weights @ per_object[state.occ].sum(axis=1))
    return state.log2_norm, i2


def differential_entropy(state: PosteriorState) -> float:
    """Exact differential entropy of the posterior, in bits."""
    i1, i2 = entropy_terms(state)
    return i1 + i2


def posterior_density(state: PosteriorState, u) -> float:
    u = np.asarray(u, dtype=float).ravel()
    if u.size != state.k:
        raise ValueError(f"point must have {state.k} coordinates")
    idx = np.searchsorted(state.iv_lo, u, side="left") - 1
    if np.any(idx < 0) or np.any(u > state.iv_hi[np.maximum(idx, 0)]):
        return 0.0
    row = np.sort(state.iv_cell[idx])
    if not np.any(np.all(state.occ == row, axis=1)):
        return 0.0
    return float(np.prod(state.prior.density(u)) * 2.0 ** (-state.log2_norm))


def count_vector_support_size(state: PosteriorState) -> int:
    return int(state.occ.shape[0])


def matrix_count(state: PosteriorState) -> int:
    """Number of labelled codeword matrices consistent with the history."""
    total = 0
    kf = math.factorial(state.k)
    for row in state.occ:
        denom = 1
        for _, grp in itertools.groupby(row.tolist()):
            denom *= math.factorial(len(list(grp)))
        total += kf // denom
    return total


class DyadicEntropyTracker:
    """Closed-form ``H(p_n)`` under the dyadic policy for any piecewise prior.

    ``H(p_n) = -(n k - sum_j log2 C(k, x_j)) + I2(n)``.  Cells at level ``n``
    are quantile slices of mass ``2**-n`` and each object's code has the
    product-form posterior ``prod_j (x_j/k)^s_j (1 - x_j/k)^(1 - s_j)``, so
    ``I2(n) = -k * sum_s P(s) 2**n ∫_{C_s} f0 log2 f0``.  Subtrees inside a
    single density piece contribute ``P(prefix) * log2(d)`` once and for all;
    only the few slices straddling a breakpoint are carried forward.
    """

    def __init__(self, prior: Prior, k: int):
        self.prior = prior
        self.k = k
        self.n = 0
        self.answers: list[int] = []
        self._log2_binom_sum = 0.0
        pos = prior.densities > 0
        cum = [Fraction(c) for c in prior._cum]
        self._pieces = [
            (cum[i], cum[i + 1], math.log2(prior.densities[i])) for i in range(prior.densities.size) if pos[i]
        ]
        self._settled = 0.0
        self._frontier: list[tuple[int, float, float]] = []
        self._visit(0, 0, 1.0)

    def _node(self, level: int, j: int) -> tuple[float, bool]:
        """``(2**level ∫ f0 log2 f0 over the slice, whether it lies in one density level)``."""
        scale = 2 ** level
        lo, hi = Fraction(j, scale), Fraction(j + 1, scale)
        total = 0.0
        dens = set()
        for a, b, logd in self._pieces:
            ov = min(hi, b) - max(lo, a)
            if ov > 0:
                total += float(ov * scale) * logd
                dens.add(logd)
        return total, len(dens) <= 1

    def _visit(self, level: int, j: int, prob: float) -> None:
        value, single = self._node(level, j)
        if single:
            self._settled += prob * value
        else:
            self._frontier.append((j, prob, value))

    def update(self, x: int) -> None:
        k = self.k
        if not 0 <= x <= k:
            raise ValueError(f"answer {x} outside 0..{k}")
        frontier, self._frontier = self._frontier, []
        self.n += 1
        for j, prob, _ in frontier:
            for bit, factor in ((0, 1 - x / k), (1, x / k)):
                if factor > 0:
                    self._visit(self.n, 2 * j + bit, prob * factor)
        self.answers.append(int(x))
        self._log2_binom_sum += math.log2(math.comb(k, x))

    @property
    def i1(self) -> float:
        return -(self.n * self.k - self._log2_binom_sum)

    @property
    def i2(self) -> float:
        return -self.k * (self._settled + sum(prob * value for _, prob, value in self._frontier))

    @property
    def entropy(self) -> float:
        return self.i1 + self.i2
