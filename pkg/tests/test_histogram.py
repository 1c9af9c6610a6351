import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dphist import (
    Histogram,
    Range,
    TreeLayout,
    TreeVector,
    hierarchical_sequence,
    neighbors,
    range_count,
    sorted_sequence,
    validate_sorted,
    validate_tree,
)
from dphist.errors import ParameterError, RangeError

from conftest import FIG1_TRUE_TREE

counts_lists = st.lists(st.integers(0, 50), min_size=1, max_size=40)


def test_histogram_rejects_bad_counts():
    with pytest.raises(ParameterError):
        Histogram([])
    with pytest.raises(ParameterError):
        Histogram([1, -1])
    with pytest.raises(ParameterError):
        Histogram([1.5])
    assert Histogram([2.0, 3.0]).counts.dtype == np.int64


def test_histogram_is_immutable(fig1_hist):
    with pytest.raises(ValueError):
        fig1_hist.counts[0] = 5


def test_range_count_fig1(fig1_hist):
    assert range_count(fig1_hist, Range(3, 4)) == 12
    assert range_count(fig1_hist, Range(1, 4)) == 14
    for i, c in enumerate(fig1_hist.counts, start=1):
        assert range_count(fig1_hist, Range(i, i)) == c


def test_range_errors(fig1_hist):
    with pytest.raises(RangeError):
        Range(0, 2)
    with pytest.raises(RangeError):
        Range(3, 2)
    with pytest.raises(RangeError):
        range_count(fig1_hist, Range(2, 5))


def test_sorted_sequence_examples(fig1_hist):
    assert sorted_sequence(fig1_hist).tolist() == [0, 2, 2, 10]
    assert sorted_sequence(Histogram([1, 2, 3])).tolist() == [1, 2, 3]
    assert sorted_sequence(Histogram([5, 5, 5])).tolist() == [5, 5, 5]


def test_hierarchical_sequence_fig1(fig1_hist):
    tree = hierarchical_sequence(fig1_hist, 2)
    assert tree.values.tolist() == FIG1_TRUE_TREE
    assert tree.layout.height == 3


def test_hierarchical_sequence_pads_to_power_of_k():
    h = Histogram([3, 1, 4, 1, 5])
    tree = hierarchical_sequence(h, 2)
    layout = tree.layout
    assert (layout.n_leaves, layout.height, layout.total_nodes) == (8, 4, 15)
    assert tree.leaves.tolist() == [3, 1, 4, 1, 5, 0, 0, 0]
    # independent check: every node is the plain sum over its bucket span
    padded = [3, 1, 4, 1, 5, 0, 0, 0]
    for node in range(layout.total_nodes):
        span = layout.leaf_range(node)
        assert tree[node] == sum(padded[span.lo - 1 : span.hi])
    assert tree[0] == 14


def test_hierarchical_sequence_zero_and_bad_k():
    assert not hierarchical_sequence(Histogram([0] * 9), 3).values.any()
    with pytest.raises(ParameterError):
        hierarchical_sequence(Histogram([1]), 1)


def test_layout_index_maps_are_bfs_bijection():
    for k, height in [(2, 1), (2, 4), (3, 3), (4, 3)]:
        layout = TreeLayout(k, height)
        assert layout.n_leaves == k ** (height - 1)
        assert layout.total_nodes == (k**height - 1) // (k - 1)
        seen = set()
        for depth in range(height):
            for offset in range(k**depth):
                node = layout.node_id(depth, offset)
                assert layout.position(node) == (depth, offset)
                seen.add(node)
                for child in layout.children(node):
                    assert layout.parent(child) == node
        assert seen == set(range(layout.total_nodes))


def test_layout_for_domain():
    assert TreeLayout.for_domain(1, 2).height == 1
    assert TreeLayout.for_domain(4, 2).height == 3
    assert TreeLayout.for_domain(5, 2).n_leaves == 8
    assert TreeLayout.for_domain(10, 3).n_leaves == 27


def test_neighbors_enumeration():
    assert [h.counts.tolist() for h in neighbors(Histogram([0]))] == [[1]]
    got = sorted(h.counts.tolist() for h in neighbors(Histogram([1, 0])))
    assert got == sorted([[2, 0], [1, 1], [0, 0]])


@given(counts_lists)
def test_neighbor_count(counts):
    h = Histogram(counts)
    expected = h.n + sum(c > 0 for c in counts)
    assert len(list(neighbors(h))) == expected


@given(counts_lists)
def test_full_range_and_leaf_roundtrip(counts):
    h = Histogram(counts)
    assert range_count(h, Range(1, h.n)) == sum(counts)
    tree = hierarchical_sequence(h, 2)
    assert tree.leaves[: h.n].tolist() == counts
    assert validate_tree(tree, tol=0)


@given(counts_lists)
def test_sorted_is_permutation(counts):
    s = sorted_sequence(Histogram(counts))
    assert validate_sorted(s)
    assert sorted(counts) == s.tolist()


@settings(max_examples=30)
@given(st.lists(st.integers(0, 20), min_size=1, max_size=32), st.sampled_from([2, 3]))
def test_neighbor_l1_displacements(counts, k):
    h = Histogram(counts)
    tree = hierarchical_sequence(h, k)
    for g in neighbors(h):
        assert np.abs(g.counts - h.counts).sum() == 1
        assert np.abs(sorted_sequence(g) - sorted_sequence(h)).sum() == 1
        assert np.abs(hierarchical_sequence(g, k).values - tree.values).sum() == tree.layout.height


def test_validators():
    assert validate_sorted([1, 1, 1, 11])
    assert not validate_sorted([1, 2, 0, 11])
    layout = TreeLayout(2, 3)
    assert validate_tree(TreeVector(layout, FIG1_TRUE_TREE))
    assert not validate_tree(TreeVector(layout, [13, 3, 11, 4, 1, 12, 1]))
    assert validate_tree(TreeVector(layout, [1.0, 0.5, 0.5 + 1e-12, 0.25, 0.25, 0.25, 0.25]), tol=1e-9)
