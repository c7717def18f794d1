"""Seeded replications of a policy against a ground-truth oracle.

Replication ``rep`` draws from ``numpy.random.default_rng([master_seed, rep])``,
so results do not depend on execution order or worker count.
"""

from __future__ import annotations

import contextlib
import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from sumtest.dist import binomial_half_entropy, log_binomial_coeff_variance, pmf_entropy
from sumtest.measure import IntervalSet, Prior
from sumtest.policies import (
    Bisection,
    Dyadic,
    Greedy,
    PolicyKind,
    SequentialBifurcation,
    dyadic_question,
    greedy_fractions,
    realize_fractions,
    sb_done,
    sb_initial,
    sb_step,
    sb_update,
)
from sumtest.posterior import (
    DyadicEntropyTracker,
    PosteriorState,
    differential_entropy,
    entropy_terms,
    predictive_from_fractions,
    refine,
)


@dataclass(frozen=True)
class SimConfig:
    prior: Prior
    k: int
    N: int
    policy: PolicyKind = field(default_factory=Dyadic)
    replications: int = 1
    master_seed: int = 0
    exact: bool = False  # dyadic only: also refine the full posterior state

    def __post_init__(self):
        if self.k < 1 or self.N < 1 or self.replications < 1:
            raise ValueError("k, N and replications must be >= 1")
        if isinstance(self.policy, Bisection):
            raise ValueError("per-object bisection asks about one object at a time; it has no sum-question run")
        if not 0 <= self.master_seed < 2 ** 64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")


@dataclass
class Trajectory:
    rep: int
    theta: np.ndarray
    answers: np.ndarray
    entropies: np.ndarray  # H(p_0) .. H(p_n), bits
    predictive_entropies: np.ndarray  # entropy of the answer distribution before each question
    i2: np.ndarray  # -E[log2 p0(theta)] under p_0 .. p_n
    exact_entropies: np.ndarray | None = None

    @property
    def n(self) -> int:
        return int(self.answers.size)

    @property
    def final_entropy(self) -> float:
        return float(self.entropies[-1])

    @property
    def rate(self) -> float:
        return (float(self.entropies[0]) - self.final_entropy) / max(self.n, 1)


def rng_for(master_seed: int, rep: int) -> np.random.Generator:
    return np.random.default_rng([master_seed, rep])


def sample_theta(prior: Prior, k: int, rng: np.random.Generator) -> np.ndarray:
    """``k`` i.i.d. draws from the prior by inverse CDF on ``(0, 1]`` uniforms."""
    return np.asarray(prior.quantile(1.0 - rng.random(k)), dtype=float)


def answer(theta, question: IntervalSet) -> int:
    return int(np.count_nonzero(question.contains(np.asarray(theta, dtype=float))))


def _run_dyadic(cfg: SimConfig, rep: int) -> Trajectory:
    # Sampling each object's quantile level bit by bit is exact for any N,
    # whereas a float location only resolves about 53 dyadic questions.
    rng = rng_for(cfg.master_seed, rep)
    bits = rng.integers(0, 2, size=(cfg.k, cfg.N))
    weights = 0.5 ** np.arange(1, min(cfg.N, 52) + 1)
    level = bits[:, : weights.size] @ weights + (1.0 - rng.random(cfg.k)) * 0.5 ** weights.size
    theta = np.asarray(cfg.prior.quantile(np.minimum(level, 1.0)), dtype=float)
    answers = bits.sum(axis=0)

    tracker = DyadicEntropyTracker(cfg.prior, cfg.k)
    entropies, i2 = [tracker.entropy], [tracker.i2]
    for x in answers:
        tracker.update(int(x))
        entropies.append(tracker.entropy)
        i2.append(tracker.i2)
    exact = None
    if cfg.exact:
        state = PosteriorState.initial(cfg.prior, cfg.k)
        exact = [differential_entropy(state)]
        for n, x in enumerate(answers, start=1):
            state = refine(state, dyadic_question(cfg.prior, n), int(x))
            exact.append(differential_entropy(state))
        exact = np.array(exact)
    return Trajectory(
        rep=rep,
        theta=theta,
        answers=answers.astype(np.int64),
        entropies=np.array(entropies),
        predictive_entropies=np.full(cfg.N, binomial_half_entropy(cfg.k)),
        i2=np.array(i2),
        exact_entropies=exact,
    )


def _run_greedy(cfg: SimConfig, rep: int) -> Trajectory:
    rng = rng_for(cfg.master_seed, rep)
    theta = sample_theta(cfg.prior, cfg.k, rng)
    state = PosteriorState.initial(cfg.prior, cfg.k)
    answers, pred = [], []
    entropies = [differential_entropy(state)]
    i2 = [entropy_terms(state)[1]]
    for _ in range(cfg.N):
        r, _ = greedy_fractions(state, cfg.policy.params)
        pred.append(predictive_from_fractions(state, r).entropy)
        q = realize_fractions(state, r)
        x = answer(theta, q)
        answers.append(x)
        state = refine(state, q, x)
        entropies.append(differential_entropy(state))
        i2.append(entropy_terms(state)[1])
    return Trajectory(rep, theta, np.array(answers, dtype=np.int64), np.array(entropies), np.array(pred), np.array(i2))


def _run_sb(cfg: SimConfig, rep: int) -> Trajectory:
    rng = rng_for(cfg.master_seed, rep)
    theta = sample_theta(cfg.prior, cfg.k, rng)
    pol = cfg.policy
    state = sb_initial(cfg.prior, cfg.k, pol.target_bits, pol.stop)
    answers, pred, entropies = [], [], [state.entropy]
    while len(answers) < cfg.N and not sb_done(state):
        q, state = sb_step(state)
        c = state.active[state.pending[0]].count
        pred.append(pmf_entropy([math.comb(c, x) / 2.0 ** c for x in range(c + 1)]))
        x = answer(theta, q)
        answers.append(x)
        state = sb_update(state, x)
        entropies.append(state.entropy)
    i2 = np.full(len(entropies), cfg.k * cfg.prior.entropy_bits)
    return Trajectory(rep, theta, np.array(answers, dtype=np.int64), np.array(entropies), np.array(pred), i2)


def run_one(cfg: SimConfig, rep: int) -> Trajectory:
    if isinstance(cfg.policy, Dyadic):
        return _run_dyadic(cfg, rep)
    if isinstance(cfg.policy, Greedy):
        return _run_greedy(cfg, rep)
    if isinstance(cfg.policy, SequentialBifurcation):
        return _run_sb(cfg, rep)
    raise ValueError(f"unsupported policy {cfg.policy!r}")


def _run_chunk(args) -> list[Trajectory]:
    cfg, reps = args
    return [run_one(cfg, r) for r in reps]


def worker_count() -> int:
    """Parallel workers from ``SUMTEST_THREADS`` (0 or unset: one per CPU)."""
    raw = os.environ.get("SUMTEST_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"SUMTEST_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ValueError("SUMTEST_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


def run(cfg: SimConfig, workers: int | None = None) -> list[Trajectory]:
    """All replications, ordered by replication index."""
    workers = worker_count() if workers is None else workers
    reps = list(range(cfg.replications))
    if workers <= 1 or len(reps) < 2:
        return [run_one(cfg, r) for r in reps]
    chunks = [(cfg, reps[i::workers]) for i in range(workers)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        out = [t for part in pool.map(_run_chunk, chunks) for t in part]
    return sorted(out, key=lambda t: t.rep)


def rate_estimate(trajs: list[Trajectory], kind: str = "realized") -> float:
    """Mean entropy reduction per question.

    ``realized`` averages ``(H(p_0) - H(p_N)) / N``; ``predictive`` averages the
    entropies of the answer distributions, whose sum has the same expectation.
    """
    if len(trajs) < 1:
        raise ValueError("need at least one trajectory")
    if kind == "realized":
        return float(np.mean([t.rate for t in trajs]))
    if kind == "predictive":
        return float(np.mean([t.predictive_entropies.sum() / max(t.n, 1) for t in trajs]))
    raise ValueError("kind must be 'realized' or 'predictive'")


@dataclass(frozen=True)
class NormalityStats:
    statistic: np.ndarray
    sigma2: float
    mean: float
    variance: float
    mean_dev: float  # mean in units of sigma
    var_ratio: float
    ks_stat: float


def normality_stats(trajs: list[Trajectory], k: int, N: int) -> NormalityStats:
    """Standardized final entropy ``(H(p_N) + N H(Bin(k,1/2)) - I2(N)) / sqrt(N)``."""
    if len(trajs) < 2:
        raise ValueError("need at least two trajectories")
    hk = binomial_half_entropy(k)
    s = np.array([(t.entropies[N] + N * hk - t.i2[N]) / math.sqrt(N) for t in trajs])
    sigma2 = log_binomial_coeff_variance(k)
    mean, var = float(s.mean()), float(s.var(ddof=1))
    if sigma2 == 0:
        return NormalityStats(s, 0.0, mean, var, mean, math.nan, math.nan)
    sigma = math.sqrt(sigma2)
    ks = float(stats.kstest(s, stats.norm(0.0, sigma).cdf).statistic)
    return NormalityStats(s, sigma2, mean, var, mean / sigma, var / sigma2, ks)


def _fmt(x: float) -> str:
    return f"{x + 0.0:.17g}"  # no negative zero


@contextlib.contextmanager
def _sink(dest):
    if hasattr(dest, "write"):
        yield dest
    else:
        with open(dest, "w", newline="") as fh:
            yield fh


def write_trajectories(dest, trajs: list[Trajectory]) -> None:
    """Columns ``rep, n, X_n, H_bits``; the ``n = 0`` row has an empty ``X_n``.

    ``dest`` is a path or an open text stream.
    """
    with _sink(dest) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rep", "n", "X_n", "H_bits"])
        for t in trajs:
            w.writerow([t.rep, 0, "", _fmt(t.entropies[0])])
            for n, (x, h) in enumerate(zip(t.answers, t.entropies[1:]), start=1):
                w.writerow([t.rep, n, int(x), _fmt(h)])


def write_summary(dest, trajs: list[Trajectory]) -> None:
    """Columns ``rep, final_entropy, rate``."""
    with _sink(dest) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rep", "final_entropy", "rate"])
        for t in trajs:
            w.writerow([t.rep, _fmt(t.final_entropy), _fmt(t.rate)])
