"""Kruskal-Wallis against hand computation, scipy, and the exact variant."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import kruskal

from bubblesim.stats import kruskal_wallis, kruskal_wallis_exact, kruskal_wallis_h


def test_identical_groups_h_zero_p_one():
    groups = [np.full(4, 7.0) for _ in range(5)]
    h, p = kruskal_wallis(groups)
    assert h == 0.0 and p == 1.0


def test_three_by_three_fixture_hand_computed():
    # ranks 1..9, rank sums 6/15/24: H = 12/(9*10) * (36+225+576)/3 - 3*10 = 7.2
    h, p = kruskal_wallis([np.array([1, 2, 3]), np.array([4, 5, 6]), np.array([7, 8, 9])])
    assert h == pytest.approx(7.2, abs=1e-9)
    assert 0.02 < p < 0.03


def test_matches_scipy_with_ties():
    rng = np.random.default_rng(0)
    for _ in range(20):
        groups = [rng.integers(0, 8, size=int(rng.integers(3, 15))).astype(float)
                  for _ in range(int(rng.integers(2, 6)))]
        h1, p1 = kruskal_wallis(groups)
        h2, p2 = kruskal(*groups)
        assert h1 == pytest.approx(h2, abs=1e-10)
        assert p1 == pytest.approx(p2, abs=1e-10)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(st.integers(-5, 5), min_size=2, max_size=8),
                min_size=2, max_size=4))
def test_property_matches_scipy(groups):
    arrays = [np.array(g, dtype=float) for g in groups]
    pooled = np.concatenate(arrays)
    h1, p1 = kruskal_wallis(arrays)
    if np.all(pooled == pooled[0]):
        assert h1 == 0.0 and p1 == 1.0
        return
    h2, p2 = kruskal(*arrays)
    assert h1 == pytest.approx(h2, abs=1e-10)
    assert p1 == pytest.approx(p2, abs=1e-10)


def test_group_validation():
    with pytest.raises(ValueError):
        kruskal_wallis([np.array([1.0, 2.0])])
    with pytest.raises(ValueError):
        kruskal_wallis([np.array([1.0]), np.array([])])


def test_exact_permutation_p_is_valid_and_extreme_case():
    # perfectly separated tiny groups: H is maximal over permutations
    h, p = kruskal_wallis_exact([np.array([1.0, 2.0]), np.array([9.0, 10.0])])
    assert h == kruskal_wallis_h([np.array([1.0, 2.0]), np.array([9.0, 10.0])])
    # 8 of 24 orderings reach the same extreme H (identical group splits)
    assert p == pytest.approx(8 / 24)


def test_exact_rejects_large_input():
    with pytest.raises(ValueError):
        kruskal_wallis_exact([np.arange(8.0), np.arange(8.0)])


def test_shifted_groups_significant():
    rng = np.random.default_rng(5)
    a = rng.normal(0, 1, 60)
    b = rng.normal(1.2, 1, 60)
    c = rng.normal(2.4, 1, 60)
    h, p = kruskal_wallis([a, b, c])
    assert p < 1e-6
