import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mrsim.prefix import (
    DuplicateIndex,
    IndexedValue,
    TreeGeometry,
    parent_label,
    prefix_sums,
    random_indexing,
)


def scan_oracle(values):
    out, total = [], 0
    for v in values:
        total += v
        out.append(total)
    return out


def expected_rounds(n, m):
    d = m // 2
    if n <= 1:
        levels = 1
    else:
        levels = max(1, math.ceil(math.log(n, d)))
        while d**levels < n:
            levels += 1
        while levels > 1 and d ** (levels - 1) >= n:
            levels -= 1
    return 1 + (levels - 1) + levels, levels


class TestParentLabel:
    def test_examples(self):
        g4 = TreeGeometry(d=4, leaf_count=64, levels=3)
        assert parent_label(1, 5, g4).coords == (0, 1)
        assert parent_label(1, 0, g4).coords == (0, 0)
        g8 = TreeGeometry(d=8, leaf_count=4096, levels=4)
        assert parent_label(3, 129, g8).coords == (2, 16)

    def test_precondition_asserts(self):
        g = TreeGeometry(d=4, leaf_count=64, levels=3)
        with pytest.raises(AssertionError):
            parent_label(0, 0, g)


class TestPrefixSums:
    def test_unit_values(self):
        out, _ = prefix_sums([IndexedValue(i, 1) for i in range(4)], m_budget=4)
        assert [iv.value for iv in out] == [1, 2, 3, 4]

    def test_all_zeros(self):
        out, _ = prefix_sums([(i, 0) for i in range(37)], m_budget=8)
        assert [iv.value for iv in out] == [0] * 37

    def test_against_scan_oracle(self):
        rng = random.Random(7)
        values = [rng.randint(-100, 100) for _ in range(1000)]
        out, report = prefix_sums([(i, v) for i, v in enumerate(values)], m_budget=16, seed=3)
        assert [iv.value for iv in out] == scan_oracle(values)
        assert report.violations == []

    def test_input_order_irrelevant(self):
        values = [(i, (i * 37) % 11 - 5) for i in range(50)]
        shuffled = list(values)
        random.Random(0).shuffle(shuffled)
        a, _ = prefix_sums(values, m_budget=8)
        b, _ = prefix_sums(shuffled, m_budget=8)
        assert a == b

    @pytest.mark.parametrize("n", [1, 2, 5, 16, 64, 100, 1024])
    @pytest.mark.parametrize("m", [4, 16, 64])
    def test_round_formula_grid(self, n, m):
        out, report = prefix_sums([(i, i) for i in range(n)], m_budget=m)
        rounds, levels = expected_rounds(n, m)
        assert report.rounds == rounds
        assert [iv.value for iv in out] == scan_oracle(range(n))
        assert report.total_communication <= 4 * n * max(levels, 1)

    def test_duplicate_index(self):
        with pytest.raises(DuplicateIndex):
            prefix_sums([(0, 1), (0, 2)], m_budget=4)

    def test_index_gap(self):
        with pytest.raises(ValueError):
            prefix_sums([(0, 1), (2, 2)], m_budget=4)

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.integers(-(2**40), 2**40), min_size=1, max_size=60), st.sampled_from([4, 6, 16]))
    def test_scan_property(self, values, m):
        out, _ = prefix_sums([(i, v) for i, v in enumerate(values)], m_budget=m)
        assert [iv.value for iv in out] == scan_oracle(values)


class TestRandomIndexing:
    def test_single_item(self):
        perm, _ = random_indexing(1, 1, m_budget=8)
        assert perm == [0]

    def test_small_permutation(self):
        perm, _ = random_indexing(5, 5, m_budget=8, seed=11)
        assert sorted(perm) == [0, 1, 2, 3, 4]

    @pytest.mark.parametrize("seed", range(6))
    def test_permutation_many_seeds(self, seed):
        perm, report = random_indexing(200, 200, m_budget=16, seed=seed)
        assert sorted(perm) == list(range(200))
        assert report.violations == []

    def test_seed_changes_assignment(self):
        a, _ = random_indexing(64, 64, m_budget=8, seed=1)
        b, _ = random_indexing(64, 64, m_budget=8, seed=2)
        assert a != b

    def test_estimate_must_cover_input(self):
        with pytest.raises(ValueError):
            random_indexing(10, 5, m_budget=8)

    def test_communication_bound(self):
        n = 1000
        perm, report = random_indexing(n, n, m_budget=64, seed=5)
        d = 32
        levels = math.ceil(3 * math.log(n, d))
        assert report.total_communication <= 4 * n * levels
