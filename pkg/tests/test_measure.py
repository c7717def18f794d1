import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sumtest.measure import (
    IntervalSet,
    Prior,
    clip_pieces,
    complement_within,
    intersect,
    load_prior,
    mass,
    mass_prefix,
    prior_from_dict,
    quantile,
    union,
)

from conftest import random_interval_set

GRID = np.linspace(-1.0, 2.0, 10_001)


def members(s: IntervalSet, x=GRID):
    # pointwise oracle, independent of the searchsorted implementation
    out = np.zeros(x.shape, dtype=bool)
    for a, b in s:
        out |= (x > a) & (x <= b)
    return out


interval_lists = st.lists(
    st.tuples(st.floats(-1, 2, allow_nan=False), st.floats(0.001, 1)).map(lambda t: (t[0], t[0] + t[1])),
    max_size=6,
)


class TestIntervalSet:
    def test_adjacent_merge(self):
        assert union(IntervalSet([(0, 0.5)]), IntervalSet([(0.5, 1)])) == IntervalSet([(0, 1)])

    def test_two_pieces(self):
        u = union(IntervalSet([(0, 0.25)]), IntervalSet([(0.5, 0.75)]))
        assert len(u) == 2 and u.length == pytest.approx(0.5)

    def test_intersect_examples(self):
        assert intersect(IntervalSet([(0, 1)]), IntervalSet([(0.5, 2)])) == IntervalSet([(0.5, 1)])
        assert not intersect(IntervalSet([(0, 1)]), IntervalSet([(2, 3)]))

    def test_complement_within(self):
        u = IntervalSet([(0, 1)])
        assert complement_within(IntervalSet([(0.5, 1)]), u) == IntervalSet([(0, 0.5)])
        assert not complement_within(u, u)
        with pytest.raises(ValueError):
            complement_within(IntervalSet([(0.5, 2)]), u)

    def test_rejects_empty_interval(self):
        with pytest.raises(ValueError):
            IntervalSet([(1, 1)])

    def test_half_open_membership(self):
        s = IntervalSet([(0, 1)])
        assert list(s.contains([0.0, 1e-9, 1.0, 1.0 + 1e-9])) == [False, True, True, False]

    def test_immutable(self):
        s = IntervalSet([(0, 1)])
        with pytest.raises(AttributeError):
            s.lo = np.array([0.5])
        with pytest.raises(ValueError):
            s.lo[0] = 0.5

    @given(interval_lists, interval_lists)
    @settings(max_examples=150, deadline=None)
    def test_set_algebra_matches_pointwise_oracle(self, a, b):
        A, B = IntervalSet(a), IntervalSet(b)
        ma, mb = members(A), members(B)
        assert np.array_equal(members(A.union(B)), ma | mb)
        assert np.array_equal(members(A.intersect(B)), ma & mb)
        assert np.array_equal(members(A.difference(B)), ma & ~mb)
        assert A.union(B).length <= A.length + B.length + 1e-12

    @given(interval_lists)
    @settings(max_examples=100, deadline=None)
    def test_normalized_invariants(self, a):
        s = IntervalSet(a)
        assert np.all(s.lo < s.hi)
        assert np.all(s.hi[:-1] < s.lo[1:])

    @given(interval_lists)
    @settings(max_examples=100, deadline=None)
    def test_cover_tiles_the_line(self, a):
        s = IntervalSet(a)
        lo, hi, inside = s.cover()
        assert lo[0] == -np.inf and hi[-1] == np.inf
        assert np.array_equal(hi[:-1], lo[1:])
        mid = (np.clip(lo, -10, None) + np.clip(hi, None, 10)) / 2
        assert np.array_equal(s.contains(mid), inside == 1)
        assert s.cover() is s.cover()

    def test_random_complement_within(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            uni = random_interval_set(rng)
            a = uni.intersect(random_interval_set(rng))
            c = complement_within(a, uni)
            assert np.array_equal(members(c), members(uni) & ~members(a))

    def test_clip_pieces_tags_source(self):
        lo, hi = np.array([0.0, 0.5]), np.array([0.4, 1.0])
        q = IntervalSet([(0.2, 0.6)])
        plo, phi, src = clip_pieces(lo, hi, q.lo, q.hi)
        assert plo.tolist() == [0.2, 0.5] and phi.tolist() == [0.4, 0.6] and src.tolist() == [0, 1]


class TestPrior:
    def test_mass_examples(self, uniform, step_prior):
        assert mass(uniform, IntervalSet([(0.25, 0.5)])) == pytest.approx(0.25, abs=1e-15)
        assert mass(step_prior, step_prior.support) == pytest.approx(1.0, abs=1e-15)
        assert mass(step_prior, IntervalSet([(0.25, 0.75)])) == pytest.approx(0.5, abs=1e-15)

    def test_quantile_examples(self, uniform, step_prior):
        assert quantile(uniform, 0.5) == 0.5
        assert quantile(step_prior, 0.0) == 0.0 and quantile(step_prior, 1.0) == 1.0
        assert quantile(step_prior, 0.125) == pytest.approx(0.25, abs=1e-15)
        assert quantile(step_prior, 0.5) == pytest.approx(2 / 3, abs=1e-15)
        with pytest.raises(ValueError):
            quantile(uniform, 1.5)

    def test_quantile_monotone_and_inverts_cdf(self, step_prior):
        q = np.linspace(0, 1, 1001)
        u = step_prior.quantile(q)
        assert np.all(np.diff(u) >= 0)
        np.testing.assert_allclose(step_prior.cdf(u), q, atol=1e-14)

    def test_quantile_skips_zero_density_gap(self):
        p = Prior([0, 1, 2, 3], [0.5, 0.0, 0.5])
        assert p.quantile(0.5) == pytest.approx(1.0)
        assert p.quantile(0.75) == pytest.approx(2.5)
        assert p.support == IntervalSet([(0, 1), (2, 3)])

    def test_invariants(self, step_prior):
        assert step_prior.density_sup == 1.5
        with pytest.raises(ValueError):
            Prior([0, 1], [0.9])
        with pytest.raises(ValueError):
            Prior([0, 1, 1], [0.5, 0.5])
        with pytest.raises(ValueError):
            Prior([0, 1], [-1.0])

    def test_entropy(self, uniform, step_prior):
        assert uniform.entropy_bits == 0.0
        expected = -(0.25 * np.log2(0.5) + 0.75 * np.log2(1.5))
        assert step_prior.entropy_bits == pytest.approx(expected, abs=1e-15)

    def test_density(self, step_prior):
        np.testing.assert_array_equal(step_prior.density([-1, 0, 0.2, 0.5, 0.7, 1.0, 1.1]), [0, 0, 0.5, 0.5, 1.5, 1.5, 0])

    def test_dict_roundtrip(self, step_prior, tmp_path):
        assert prior_from_dict(step_prior.to_dict()) == step_prior
        path = tmp_path / "p.json"
        path.write_text(json.dumps({"type": "uniform", "lo": 0, "hi": 2}))
        assert load_prior(path) == Prior.uniform(0, 2)

    def test_dict_errors(self):
        with pytest.raises(ValueError):
            prior_from_dict({"type": "uniform", "extra": 1})
        with pytest.raises(ValueError):
            prior_from_dict({"type": "piecewise", "breakpoints": [0, 1], "densities": [0.9]})
        with pytest.raises(ValueError):
            prior_from_dict({"type": "beta"})

    def test_dict_rescales_tiny_drift(self):
        p = prior_from_dict({"type": "piecewise", "breakpoints": [0, 1], "densities": [1 + 1e-10]})
        assert p.densities[0] == pytest.approx(1.0, abs=1e-15)


class TestMassPrefix:
    def test_examples(self, uniform):
        cell = IntervalSet([(0, 1)])
        assert mass_prefix(uniform, cell, 0.5) == IntervalSet([(0, 0.5)])
        assert not mass_prefix(uniform, cell, 0.0)
        assert mass_prefix(uniform, cell, 1.0) == cell
        two = IntervalSet([(0, 0.25), (0.75, 1)])
        assert mass_prefix(uniform, two, 0.75) == IntervalSet([(0, 0.25), (0.75, 0.875)])

    def test_random_masses(self, step_prior):
        rng = np.random.default_rng(5)
        for _ in range(200):
            cell = random_interval_set(rng, lo=0, hi=1)
            if mass(step_prior, cell) <= 0:
                continue
            r = float(rng.random())
            part = mass_prefix(step_prior, cell, r)
            assert part.issubset(cell)
            assert mass(step_prior, part) == pytest.approx(r * mass(step_prior, cell), abs=1e-12)
            # leftmost: nothing of the cell lies left of the cut outside the prefix
            rest = cell.difference(part)
            if part and rest:
                assert rest.lo[0] >= part.hi[-1] - 1e-12

    def test_rejects_zero_mass(self, uniform):
        with pytest.raises(ValueError):
            mass_prefix(uniform, IntervalSet([(2, 3)]), 0.5)
