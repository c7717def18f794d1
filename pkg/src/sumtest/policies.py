"""Question policies: dyadic, greedy, sequential bifurcation, per-object bisection.

Also the closed-form question-count curves used to compare them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Union

import numpy as np
from scipy.optimize import minimize

from sumtest import kernels
from sumtest.dist import PMF_FLOOR, binomial_half_entropy, pmf_entropy
from sumtest.measure import IntervalSet, Prior, mass, mass_prefix
from sumtest.posterior import InconsistentAnswer, PosteriorState

__all__ = [
    "Bisection",
    "CurvePoint",
    "Dyadic",
    "Greedy",
    "GreedyParams",
    "InconsistentAnswer",
    "PolicyKind",
    "SBState",
    "SequentialBifurcation",
    "StateTooLarge",
    "dyadic_question",
    "greedy_fractions",
    "greedy_objective",
    "greedy_question",
    "question_count_curves",
    "realize_fractions",
    "run_sb",
    "sb_done",
    "sb_initial",
    "sb_step",
    "sb_update",
]


class StateTooLarge(RuntimeError):
    """The posterior has more live cells than the greedy optimizer accepts."""


@dataclass(frozen=True)
class GreedyParams:
    restarts: int = 8
    resolution: int = 33
    levels: int = 8
    tol: float = 1e-10
    max_sweeps: int = 200
    max_cells: int = 256
    seed: int = 0
    balance: bool = True

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.resolution < 2:
            raise ValueError("grid resolution must be >= 2")
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")
        if self.levels < 1 or self.max_sweeps < 1 or self.max_cells < 1:
            raise ValueError("levels, max_sweeps and max_cells must be >= 1")


@dataclass(frozen=True)
class Dyadic:
    pass


@dataclass(frozen=True)
class Greedy:
    params: GreedyParams = field(default_factory=GreedyParams)


@dataclass(frozen=True)
class SequentialBifurcation:
    target_bits: int = 20
    stop: str = "entropy"

    def __post_init__(self):
        if self.target_bits < 1:
            raise ValueError("target_bits must be >= 1")
        if self.stop not in ("entropy", "precision"):
            raise ValueError("stop must be 'entropy' or 'precision'")


@dataclass(frozen=True)
class Bisection:
    target_bits: int = 20

    def __post_init__(self):
        if self.target_bits < 1:
            raise ValueError("target_bits must be >= 1")


PolicyKind = Union[Dyadic, Greedy, SequentialBifurcation, Bisection]


# ---------------------------------------------------------------- dyadic


@lru_cache(maxsize=64)
def dyadic_question(prior: Prior, n: int) -> IntervalSet:
    """Union of the upper halves of the level-``n-1`` quantile slices."""
    if n < 1:
        raise ValueError("n must be >= 1")
    m = 2 ** n
    edges = prior.quantile(np.arange(m + 1) / m)
    q = IntervalSet.from_arrays(edges[1:-1:2], edges[2::2])
    return q.intersect(prior.support)


# ---------------------------------------------------------------- greedy


def greedy_objective(state: PosteriorState, r) -> float:
    """Entropy of the next answer when a fraction ``r[c]`` of each cell is asked about."""
    return pmf_entropy(kernels.mixture_pb_pmf(state.occ, state.weights, np.asarray(r, dtype=float)))


def _entropy_and_grad(state: PosteriorState, r: np.ndarray) -> tuple[float, np.ndarray]:
    p = kernels.mixture_pb_pmf(state.occ, state.weights, r)
    safe = np.maximum(p, PMF_FLOOR)
    v = -(np.log2(safe) + 1.0 / math.log(2))
    return pmf_entropy(p), kernels.mixture_pb_grad(state.occ, state.weights, r, v)


def _ascend(state, r, maxmult, params) -> tuple[np.ndarray, float]:
    h = greedy_objective(state, r)
    for _ in range(params.max_sweeps):
        kernels.coordinate_sweep(state.occ, state.weights, r, maxmult, params.resolution, params.levels)
        new = greedy_objective(state, r)
        done = new - h < params.tol
        h = max(h, new)
        if done:
            break
    return r, h


def _balance(state, r, h_best, h_half) -> np.ndarray:
    """Move along the set of maximizers towards the point closest to all-1/2."""
    x = r.copy()
    for mu in (1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7):

        def fun(z, mu=mu):
            h, g = _entropy_and_grad(state, z)
            d = z - 0.5
            return -h + mu * float(d @ d), -g + 2.0 * mu * d

        res = minimize(fun, x, jac=True, method="L-BFGS-B", bounds=[(0.0, 1.0)] * x.size,
                       options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 500})
        x = np.clip(res.x, 0.0, 1.0)
    h = greedy_objective(state, x)
    if h < h_best - 1e-9 or h < h_half:
        return r
    return x


def _canonical(r: np.ndarray) -> np.ndarray:
    # the objective is invariant under r -> 1 - r; pick the representative
    # whose first coordinate away from 1/2 lies above it
    off = np.flatnonzero(np.abs(r - 0.5) > 1e-9)
    if off.size and r[off[0]] < 0.5:
        return 1.0 - r
    return r


def greedy_fractions(state: PosteriorState, params: GreedyParams = GreedyParams()) -> tuple[np.ndarray, float]:
    """Per-cell fractions maximizing the next answer's entropy, and that entropy."""
    if state.n_cells > params.max_cells:
        raise StateTooLarge(f"{state.n_cells} live cells exceeds limit {params.max_cells}")
    maxmult = state.max_multiplicity()
    rng = np.random.default_rng(params.seed)
    starts = [np.full(state.n_cells, 0.5)] + [rng.random(state.n_cells) for _ in range(params.restarts)]
    h_half = greedy_objective(state, starts[0])
    best_r, best_h = None, -np.inf
    for start in starts:
        r, h = _ascend(state, start.copy(), maxmult, params)
        if h > best_h + 1e-12:
            best_r, best_h = r, h
    if params.balance:
        best_r = _balance(state, best_r, best_h, h_half)
    best_r = _canonical(best_r)
    return best_r, greedy_objective(state, best_r)


def realize_fractions(state: PosteriorState, r) -> IntervalSet:
    """A concrete question taking the leftmost fraction ``r[c]`` of each live cell's mass."""
    lo, hi = [], []
    for c, frac in enumerate(np.asarray(r, dtype=float)):
        if frac <= 0.0:
            continue
        part = mass_prefix(state.prior, state.cell_region(c), min(1.0, float(frac)))
        lo.append(part.lo)
        hi.append(part.hi)
    if not lo:
        return IntervalSet.empty()
    return IntervalSet.from_arrays(np.concatenate(lo), np.concatenate(hi))


def greedy_question(state: PosteriorState, params: GreedyParams = GreedyParams()) -> tuple[IntervalSet, float]:
    r, h = greedy_fractions(state, params)
    return realize_fractions(state, r), h


# ---------------------------------------------------------------- sequential bifurcation


@dataclass(frozen=True)
class SBInterval:
    region: IntervalSet
    count: int
    mass: float
    entropy: float  # differential entropy of one object spread over the region, bits


@dataclass(frozen=True)
class SBState:
    prior: Prior
    k: int
    target_bits: int
    stop: str
    active: tuple[SBInterval, ...]
    retired: tuple[SBInterval, ...] = ()
    questions: int = 0
    pending: tuple[int, IntervalSet, IntervalSet] | None = None

    @property
    def entropy(self) -> float:
        """Joint entropy of the objects given what the answers so far reveal."""
        parts = self.active + self.retired
        log_labels = math.lgamma(self.k + 1) - sum(math.lgamma(p.count + 1) for p in parts)
        return log_labels / math.log(2) + sum(p.count * p.entropy for p in parts)


def _sb_interval(prior: Prior, region: IntervalSet, count: int) -> SBInterval:
    m = mass(prior, region)
    g = float(np.sum(prior.plogp_arrays(region.lo, region.hi)))
    return SBInterval(region, count, m, math.log2(m) - g / m)


def sb_initial(prior: Prior, k: int, target_bits: int = 20, stop: str = "entropy") -> SBState:
    SequentialBifurcation(target_bits, stop)
    root = _sb_interval(prior, prior.support, k)
    return SBState(prior, k, target_bits, stop, (root,))


def sb_done(state: SBState) -> bool:
    if state.stop == "precision":
        return not state.active
    h0 = state.k * state.prior.entropy_bits
    return h0 - state.entropy >= state.target_bits * state.k - 1e-9


def sb_step(state: SBState, prior: Prior | None = None) -> tuple[IntervalSet, SBState]:
    """Question splitting the heaviest active interval at its conditional median."""
    if state.pending is not None:
        raise RuntimeError("previous question has not been answered")
    if sb_done(state):
        raise RuntimeError("localization already complete")
    prior = state.prior if prior is None else prior
    masses = np.array([iv.mass for iv in state.active])
    # active intervals are kept sorted, so the first near-maximum is the leftmost
    i = int(np.flatnonzero(masses >= masses.max() * (1 - 1e-9))[0])
    region = state.active[i].region
    left = mass_prefix(prior, region, 0.5)
    right = region.difference(left)
    return left, replace(state, pending=(i, left, right))


def sb_update(state: SBState, x: int) -> SBState:
    if state.pending is None:
        raise RuntimeError("no question pending")
    i, left, right = state.pending
    parent = state.active[i]
    if not 0 <= x <= parent.count:
        raise InconsistentAnswer(f"answer {x} impossible for an interval holding {parent.count}")
    active = list(state.active[:i] + state.active[i + 1 :])
    retired = list(state.retired)
    for region, c in ((left, x), (right, parent.count - x)):
        if c == 0:
            continue
        child = _sb_interval(state.prior, region, c)
        if state.stop == "precision" and child.mass <= 2.0 ** -state.target_bits:
            retired.append(child)
        else:
            active.append(child)
    active.sort(key=lambda iv: iv.region.lo[0])
    return replace(state, active=tuple(active), retired=tuple(retired), questions=state.questions + 1, pending=None)


def run_sb(prior: Prior, theta, target_bits: int = 20, stop: str = "entropy", max_questions: int = 100_000):
    """Run SB against a fixed location vector; returns ``(questions, answers)``."""
    theta = np.asarray(theta, dtype=float)
    state = sb_initial(prior, theta.size, target_bits, stop)
    answers = []
    while not sb_done(state):
        if state.questions >= max_questions:
            raise RuntimeError("sequential bifurcation did not terminate")
        q, state = sb_step(state)
        x = int(np.count_nonzero(q.contains(theta)))
        answers.append(x)
        state = sb_update(state, x)
    return state.questions, answers


# ---------------------------------------------------------------- curves


@dataclass(frozen=True)
class CurvePoint:
    k: int
    benchmark1: int
    sb_mean: float
    dyadic: int
    lower_bound: int


def _ceil(x: float) -> int:
    return math.ceil(x - 1e-9)


def question_count_curves(
    k: int, bits: int = 20, sb_reps: int = 100, seed: int = 0, prior: Prior | None = None, stop: str = "entropy"
) -> CurvePoint:
    """Questions needed to remove ``bits`` bits of entropy per object."""
    if k < 1 or bits < 1:
        raise ValueError("k and bits must be >= 1")
    if sb_reps < 1:
        raise ValueError("sb_reps must be >= 1")
    prior = Prior.uniform() if prior is None else prior
    total = bits * k
    counts = []
    for rep in range(sb_reps):
        rng = np.random.default_rng([seed, rep])
        theta = prior.quantile(1.0 - rng.random(k))
        counts.append(run_sb(prior, theta, bits, stop)[0])
    return CurvePoint(
        k=k,
        benchmark1=total,
        sb_mean=float(np.mean(counts)),
        dyadic=_ceil(total / binomial_half_entropy(k)),
        lower_bound=_ceil(total / math.log2(k + 1)),
    )
