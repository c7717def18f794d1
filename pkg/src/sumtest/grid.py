"""Localizing dots on an M x M image: dyadic screening, then per-pixel search.

The ``2 log2 M`` screening questions are the dyadic questions of each axis
(rows first, then columns).  Pixel ``(row, col)`` therefore has the code whose
bits are those of ``row * M + col``, read most significant first.

Search algorithms return the number of pixel-oracle calls:

* ``ir``  raster scan in row-major order;
* ``pr``  one ranking by posterior expected count;
* ``ipr`` re-ranks after each discovery with the found object removed;
* ``ep``  asks the pixel whose count is most uncertain under the posterior
  over consistent assignments, then discards the inconsistent ones.
"""

from __future__ import annotations

import contextlib
import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from sumtest.posterior import _masks

ALGORITHMS = ("ir", "pr", "ipr", "ep")
EP_MAX_K = 3
EP_MAX_M = 512
EP_MAX_SUPPORT = 5_000_000


class EPTooLarge(ValueError):
    """Entropy pursuit requested beyond its enumeration limits."""


def _log2_side(M: int) -> int:
    if M < 1 or M & (M - 1):
        raise ValueError(f"M={M} must be a power of two")
    return M.bit_length() - 1


@dataclass(frozen=True)
class GridScene:
    M: int
    pixels: tuple[tuple[int, int], ...]

    def __post_init__(self):
        _log2_side(self.M)
        if not self.pixels:
            raise ValueError("scene needs at least one object")
        if len(set(self.pixels)) != len(self.pixels):
            raise ValueError("object pixels must be distinct")
        for r, c in self.pixels:
            if not (0 <= r < self.M and 0 <= c < self.M):
                raise ValueError(f"pixel {(r, c)} outside the {self.M}x{self.M} grid")

    @property
    def k(self) -> int:
        return len(self.pixels)

    @property
    def indices(self) -> np.ndarray:
        return np.array([r * self.M + c for r, c in self.pixels], dtype=np.int64)

    def to_dict(self) -> dict:
        return {"M": self.M, "pixels": [list(p) for p in self.pixels]}

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "GridScene":
        extra = set(d) - {"M", "pixels"}
        if extra:
            raise ValueError(f"unknown scene fields: {sorted(extra)}")
        return cls(int(d["M"]), tuple((int(r), int(c)) for r, c in d["pixels"]))


def random_scene(M: int, k: int, rng: np.random.Generator) -> GridScene:
    """``k`` distinct pixels chosen uniformly."""
    if not 1 <= k <= M * M:
        raise ValueError("need 1 <= k <= M*M")
    idx = np.sort(rng.choice(M * M, size=k, replace=False))
    return GridScene(M, tuple((int(i) // M, int(i) % M) for i in idx))


def screening_answers(scene: GridScene) -> list[int]:
    L = _log2_side(scene.M)
    rows = np.array([r for r, _ in scene.pixels])
    cols = np.array([c for _, c in scene.pixels])
    out = [int(((rows >> (L - n)) & 1).sum()) for n in range(1, L + 1)]
    out += [int(((cols >> (L - n)) & 1).sum()) for n in range(1, L + 1)]
    return out


def _axis_numerators(M: int, k: int, xs) -> np.ndarray:
    """``prod_j (x_j if bit_j else k - x_j)`` for every coordinate along one axis."""
    L = _log2_side(M)
    v = np.arange(M)
    out = np.ones(M, dtype=object if k ** L >= 2 ** 62 else np.int64)
    for n, x in enumerate(xs, start=1):
        bit = (v >> (L - n)) & 1
        out = out * np.where(bit == 1, x, k - x)
    return out


def _pixel_keys(M: int, k: int, answers) -> np.ndarray:
    """Posterior expected count up to the factor ``k**(1 - 2 L)``, as exact-order keys."""
    L = _log2_side(M)
    rows = _axis_numerators(M, k, answers[:L])
    cols = _axis_numerators(M, k, answers[L:])
    if k ** (2 * L) < 2 ** 53:
        return np.outer(rows.astype(float), cols.astype(float)).ravel()
    return np.outer(rows.astype(object), cols.astype(object)).ravel()


@dataclass(frozen=True)
class GridPosterior:
    M: int
    k: int
    answers: tuple[int, ...]
    counts: np.ndarray  # M x M expected object counts


def pixel_expected_counts(k: int, answers, M: int | None = None) -> GridPosterior:
    answers = [int(x) for x in answers]
    if len(answers) % 2:
        raise ValueError("need the same number of row and column answers")
    L = len(answers) // 2
    M = 2 ** L if M is None else M
    if _log2_side(M) != L:
        raise ValueError(f"{len(answers)} answers do not match M={M}")
    if any(not 0 <= x <= k for x in answers):
        raise ValueError("answers must lie in 0..k")
    keys = _pixel_keys(M, k, answers)
    counts = np.array([float(key) for key in keys]) if keys.dtype == object else keys
    counts = counts * (k / float(k) ** (2 * L))
    return GridPosterior(M, k, tuple(answers), counts.reshape(M, M))


def _rank_position(keys: np.ndarray, p: int, allowed: np.ndarray) -> int:
    """0-based position of pixel ``p`` in descending-key, row-major-tiebreak order."""
    idx = np.arange(keys.size)
    before = (keys > keys[p]) | ((keys == keys[p]) & (idx < p))
    return int(np.count_nonzero(before & allowed))


def run_ir(scene: GridScene) -> int:
    return int(scene.indices.max()) + 1


def run_pr(scene: GridScene) -> int:
    keys = _pixel_keys(scene.M, scene.k, screening_answers(scene))
    allowed = np.ones(keys.size, dtype=bool)
    return max(_rank_position(keys, int(p), allowed) for p in scene.indices) + 1


def run_ipr(scene: GridScene) -> int:
    M, L = scene.M, _log2_side(scene.M)
    answers = screening_answers(scene)
    k = scene.k
    remaining = set(scene.indices.tolist())
    unqueried = np.ones(M * M, dtype=bool)
    idx = np.arange(M * M)
    calls = 0
    while remaining:
        keys = _pixel_keys(M, k, answers)
        pos = {p: _rank_position(keys, p, unqueried) for p in remaining}
        found = min(pos, key=pos.get)
        kp = keys[found]
        skipped = unqueried & ((keys > kp) | ((keys == kp) & (idx < found)))
        calls += pos[found] + 1
        unqueried &= ~skipped
        unqueried[found] = False
        remaining.discard(found)
        # mask the found object out of the screening answers
        code = found
        for j in range(2 * L):
            answers[j] -= (code >> (2 * L - 1 - j)) & 1
        k -= 1
    return calls


def _ep_assignments(M: int, k: int, answers) -> np.ndarray:
    """Sorted k-tuples of pixel indices consistent with the screening answers."""
    occ = np.zeros((1, k), dtype=np.int64)
    for x in answers:
        cand = (occ[:, None, :] << 1) | _masks(k, x)[None, :, :]
        occ = np.unique(np.sort(cand.reshape(-1, k), axis=1), axis=0)
        if occ.shape[0] > EP_MAX_SUPPORT:
            raise EPTooLarge(f"more than {EP_MAX_SUPPORT} consistent assignments")
    return occ


def _tuple_weights(occ: np.ndarray) -> np.ndarray:
    """Number of labelled assignments behind each sorted tuple: ``k!/prod(mult!)``."""
    s, k = occ.shape
    w = np.full(s, float(math.factorial(k)))
    run = np.ones(s)
    for i in range(1, k):
        same = occ[:, i] == occ[:, i - 1]
        run = np.where(same, run + 1, 1)
        w /= np.where(same, run, 1)
    return w


def _multiplicities(occ: np.ndarray) -> np.ndarray:
    """``mult[s, i]`` = how often ``occ[s, i]`` appears in row ``s``."""
    return (occ[:, :, None] == occ[:, None, :]).sum(axis=2)


def check_ep_limits(M: int, k: int) -> None:
    if k > EP_MAX_K:
        raise EPTooLarge(f"entropy pursuit supports k <= {EP_MAX_K}, got {k}")
    if M > EP_MAX_M:
        raise EPTooLarge(f"entropy pursuit supports M <= {EP_MAX_M}, got {M}")


def run_ep(scene: GridScene) -> int:
    M, k = scene.M, scene.k
    check_ep_limits(M, k)
    occ = _ep_assignments(M, k, screening_answers(scene))
    truth = np.bincount(scene.indices, minlength=M * M)
    unqueried = np.ones(M * M, dtype=bool)
    found = 0
    calls = 0
    while found < k:
        w = _tuple_weights(occ)
        w /= w.sum()
        mult = _multiplicities(occ)
        # each distinct pixel of a row is counted once, with its multiplicity
        first = np.ones_like(occ, dtype=bool)
        first[:, 1:] = occ[:, 1:] != occ[:, :-1]
        table = np.zeros((M * M, k + 1))
        np.add.at(table, (occ[first], mult[first]), np.broadcast_to(w[:, None], occ.shape)[first])
        table[:, 0] = np.clip(1.0 - table[:, 1:].sum(axis=1), 0.0, None)
        with np.errstate(divide="ignore", invalid="ignore"):
            h = -np.where(table > 1e-300, table * np.log2(np.where(table > 1e-300, table, 1.0)), 0.0).sum(axis=1)
        h[~unqueried] = -np.inf
        best = int(np.argmax(h))
        if h[best] <= 1e-12:
            # one assignment left: the unfound objects are exactly its unqueried pixels
            rest = [p for p in np.unique(occ[0]).tolist() if unqueried[p]]
            calls += len(rest)
            found += int(truth[rest].sum())
            break
        calls += 1
        unqueried[best] = False
        c = int(truth[best])
        found += c
        occ = occ[(occ == best).sum(axis=1) == c]
        if occ.shape[0] == 0:
            raise RuntimeError("no assignment consistent with the oracle replies")
    return calls


RUNNERS = {"ir": run_ir, "pr": run_pr, "ipr": run_ipr, "ep": run_ep}


@dataclass(frozen=True)
class LocalizeRow:
    M: int
    k: int
    algorithm: str
    rep: int
    oracle_calls: int


def localize(M: int, k: int, algorithms=ALGORITHMS, reps: int = 100, seed: int = 0) -> list[LocalizeRow]:
    """Oracle calls per algorithm on ``reps`` shared random scenes."""
    _log2_side(M)
    algorithms = list(algorithms)
    unknown = set(algorithms) - set(ALGORITHMS)
    if unknown:
        raise ValueError(f"unknown algorithms: {sorted(unknown)}")
    if "ep" in algorithms:
        check_ep_limits(M, k)
    rows = []
    for rep in range(reps):
        scene = random_scene(M, k, np.random.default_rng([seed, rep]))
        for alg in algorithms:
            rows.append(LocalizeRow(M, k, alg, rep, RUNNERS[alg](scene)))
    return rows


def write_localize(dest, rows: list[LocalizeRow]) -> None:
    """Columns ``M, k, algorithm, rep, oracle_calls``; ``dest`` is a path or text stream."""
    with contextlib.ExitStack() as stack:
        fh = dest if hasattr(dest, "write") else stack.enter_context(open(dest, "w", newline=""))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["M", "k", "algorithm", "rep", "oracle_calls"])
        for r in rows:
            w.writerow([r.M, r.k, r.algorithm, r.rep, r.oracle_calls])
