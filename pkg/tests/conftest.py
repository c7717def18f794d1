import math

import numpy as np
import pytest

from sumtest.measure import IntervalSet, Prior
from sumtest.posterior import PosteriorState, refine_all

ALPHA = (1 + math.sqrt(3) / 3) / 2
BETA = 1 - ALPHA

A1 = IntervalSet([(0.5, 1.0)])
A2 = IntervalSet([(0.25, 0.5), (0.75, 1.0)])


@pytest.fixture
def uniform():
    return Prior.uniform()


@pytest.fixture
def step_prior():
    """Density 0.5 on (0, 0.5] and 1.5 on (0.5, 1]."""
    return Prior([0.0, 0.5, 1.0], [0.5, 1.5])


@pytest.fixture
def example1(uniform):
    return refine_all(PosteriorState.initial(uniform, 2), [A1, A2], [0, 2])


@pytest.fixture
def example2(uniform):
    return refine_all(PosteriorState.initial(uniform, 2), [A1, A2], [1, 1])


def random_interval_set(rng, n_max=5, lo=-1.0, hi=2.0):
    n = int(rng.integers(0, n_max + 1))
    pts = np.sort(rng.uniform(lo, hi, size=2 * n))
    return IntervalSet([(pts[2 * i], pts[2 * i + 1]) for i in range(n) if pts[2 * i] < pts[2 * i + 1]])
