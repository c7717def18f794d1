"""Straight-line reference implementations of the grid search algorithms.

Expected counts use exact fractions; the search loops walk plain sorted lists.
"""

import itertools
import math
from fractions import Fraction

import numpy as np

from sumtest.grid import screening_answers


def code_bits(M, r, c):
    L = int(math.log2(M))
    return [(r >> (L - 1 - i)) & 1 for i in range(L)] + [(c >> (L - 1 - i)) & 1 for i in range(L)]


def reference_counts(M, k, answers):
    out = {}
    for r in range(M):
        for c in range(M):
            p = Fraction(1)
            for bit, x in zip(code_bits(M, r, c), answers):
                p *= Fraction(x, k) if bit else 1 - Fraction(x, k)
            out[r * M + c] = k * p
    return out


def reference_pr(scene):
    M, k = scene.M, scene.k
    counts = reference_counts(M, k, screening_answers(scene))
    order = sorted(counts, key=lambda i: (-counts[i], i))
    targets = {r * M + c for r, c in scene.pixels}
    calls = 0
    for p in order:
        calls += 1
        targets.discard(p)
        if not targets:
            return calls


def reference_ipr(scene):
    M, k = scene.M, scene.k
    answers = screening_answers(scene)
    targets = {r * M + c for r, c in scene.pixels}
    queried = set()
    calls = 0
    while targets:
        counts = reference_counts(M, k, answers)
        order = sorted((i for i in counts if i not in queried), key=lambda i: (-counts[i], i))
        for p in order:
            calls += 1
            queried.add(p)
            if p in targets:
                targets.discard(p)
                answers = [x - b for x, b in zip(answers, code_bits(M, p // M, p % M))]
                k -= 1
                break
    return calls


def enumerated_counts(M, k, answers):
    """Average object count per pixel over every labelled assignment consistent with the answers."""
    codes = np.array([code_bits(M, i // M, i % M) for i in range(M * M)])
    acc = np.zeros(M * M)
    total = 0
    for tup in itertools.product(range(M * M), repeat=k):
        if np.array_equal(codes[list(tup)].sum(axis=0), answers):
            total += 1
            for p in tup:
                acc[p] += 1
    return acc / total
