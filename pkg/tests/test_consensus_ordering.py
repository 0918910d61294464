"""Consensus tree summaries and SNP-distance arrival orderings."""

import numpy as np
import pytest
from numpy.random import default_rng

from tsmc.coalescent import (
    CoalState,
    compute_ordering,
    emit_newick,
    insert_leaf,
    majority_consensus,
    parse_newick,
    snp_distance_matrix,
    subtree_leaves,
    two_leaf_tree,
    weighted_median,
)


def caterpillar(heights):
    tree = two_leaf_tree(heights[0])
    for h in heights[1:]:
        tree = insert_leaf(tree, 0, h)
    return tree


def newick_clades(node, out=None):
    """Leaf-name frozensets of every internal node, with supports."""
    if out is None:
        out = {}
    if node.children:
        out[frozenset(node.leaves())] = node.support
        for c in node.children:
            newick_clades(c, out)
    return out


class TestWeightedMedian:
    def test_unequal_weights(self):
        v = np.array([1.0, 2.0, 3.0])
        assert weighted_median(v, np.array([0.2, 0.2, 0.6])) == 3.0
        assert weighted_median(v, np.array([0.6, 0.2, 0.2])) == 1.0

    def test_order_independent(self):
        v = np.array([3.0, 1.0, 2.0])
        w = np.array([0.6, 0.2, 0.2])
        assert weighted_median(v, w) == 3.0

    def test_point_mass(self):
        assert weighted_median(np.array([5.0, 7.0]), np.array([0.0, 1.0])) == 7.0


class TestMajorityConsensus:
    def test_identical_particles_reproduce_the_tree(self):
        tree = caterpillar([0.4, 1.1])
        states = [CoalState(tree, 1.0)] * 5
        node = majority_consensus(states, np.full(5, 0.2))
        clades = newick_clades(node)
        assert clades == {
            frozenset({"0", "1"}): 1.0,
            frozenset({"0", "1", "2"}): 1.0,
        }
        assert parse_newick(emit_newick(node)) == node

    def test_split_topologies_keep_only_the_shared_clade(self):
        # cherry (0,1) in both particles; the clades above it disagree
        t1 = insert_leaf(insert_leaf(two_leaf_tree(0.5), 0, 2.0), 2, 1.0)
        t2 = caterpillar([0.5, 1.0, 2.0])
        assert subtree_leaves(t1, 4) == [0, 1]
        states = [CoalState(t1, 1.0), CoalState(t2, 1.0)]
        node = majority_consensus(states, np.array([0.5, 0.5]))
        clades = newick_clades(node)
        assert set(clades) == {frozenset({"0", "1"}), frozenset({"0", "1", "2", "3"})}
        assert clades[frozenset({"0", "1"})] == 1.0
        # the root keeps every leaf even when intermediate clades drop out
        assert sorted(node.leaves()) == ["0", "1", "2", "3"]

    def test_supports_count_weight_not_particles(self):
        t_cherry = caterpillar([0.5, 1.5])
        t_other = insert_leaf(two_leaf_tree(1.5), 0, 0.5)  # cherry (0,2)
        assert subtree_leaves(t_other, 3) == [0, 2]
        states = [CoalState(t_cherry, 1.0), CoalState(t_other, 1.0)]
        node = majority_consensus(states, np.array([0.8, 0.2]))
        clades = newick_clades(node)
        assert clades[frozenset({"0", "1"})] == pytest.approx(0.8)
        assert frozenset({"0", "2"}) not in clades

    def test_heights_aggregate_by_weighted_median(self):
        trees = [two_leaf_tree(h) for h in [1.0, 2.0, 7.0]]
        states = [CoalState(t, 1.0) for t in trees]
        node = majority_consensus(states, np.array([0.3, 0.3, 0.4]))
        leaf = node.children[0]
        assert leaf.length == 2.0  # weighted median of the root heights

    def test_mean_height_stat(self):
        trees = [two_leaf_tree(h) for h in [1.0, 3.0]]
        states = [CoalState(t, 1.0) for t in trees]
        node = majority_consensus(states, np.array([0.5, 0.5]), height_stat="mean")
        assert node.children[0].length == pytest.approx(2.0)

    def test_unknown_height_stat_rejected(self):
        states = [CoalState(two_leaf_tree(1.0), 1.0)]
        with pytest.raises(ValueError):
            majority_consensus(states, np.array([1.0]), height_stat="mode")

    def test_leaf_count_mismatch_rejected(self):
        states = [
            CoalState(two_leaf_tree(1.0), 1.0),
            CoalState(caterpillar([0.5, 1.0]), 1.0),
        ]
        with pytest.raises(ValueError):
            majority_consensus(states, np.array([0.5, 0.5]))

    def test_names_label_the_leaves(self):
        states = [CoalState(two_leaf_tree(1.0), 1.0)]
        node = majority_consensus(states, np.array([1.0]), names=["x", "y"])
        assert sorted(node.leaves()) == ["x", "y"]

    def test_brute_force_tally_on_random_cloud(self):
        rng = default_rng(12)
        states = []
        for _ in range(7):
            tree = two_leaf_tree(float(rng.uniform(0.1, 1.0)))
            for _ in range(3):
                g = int(rng.integers(tree.leaf_count))
                tree = insert_leaf(tree, g, float(rng.uniform(0.1, 5.0)))
            states.append(CoalState(tree, 1.0))
        w = rng.dirichlet(np.ones(7))
        node = majority_consensus(states, w)
        got = newick_clades(node)

        tally = {}
        for wp, s in zip(w, states):
            t = s.tree.leaf_count
            for j in range(t - 1):
                clade = frozenset(str(x) for x in subtree_leaves(s.tree, t + j))
                tally[clade] = tally.get(clade, 0.0) + wp
        want = {c: s for c, s in tally.items() if s > 0.5}
        want[frozenset(str(i) for i in range(5))] = tally[frozenset(str(i) for i in range(5))]
        assert set(got) == set(want)
        for c in want:
            assert got[c] == pytest.approx(want[c], abs=1e-9)


class TestSnpDistance:
    def test_hand_matrix(self):
        aln = np.array([[0, 0, 0, 0], [0, 1, 0, 0], [1, 1, 2, 0]])
        d = snp_distance_matrix(aln)
        assert d.tolist() == [[0, 1, 3], [1, 0, 2], [3, 2, 0]]

    def test_symmetric_zero_diagonal(self):
        aln = default_rng(0).integers(0, 4, size=(5, 20))
        d = snp_distance_matrix(aln)
        assert np.array_equal(d, d.T)
        assert np.all(np.diag(d) == 0)


def alignment_with_distances():
    """Rows with d01 = 1, d02 = 5, d12 = 6."""
    row0 = np.zeros(12, dtype=int)
    row1 = row0.copy()
    row1[0] = 1
    row2 = row0.copy()
    row2[1:6] = 2
    aln = np.vstack([row0, row1, row2])
    d = snp_distance_matrix(aln)
    assert d[0, 1] == 1 and d[0, 2] == 5 and d[1, 2] == 6
    return aln


class TestComputeOrdering:
    def test_nearest_grows_from_the_closest_pair(self):
        assert compute_ordering(alignment_with_distances(), "nearest") == [0, 1, 2]

    def test_furthest_grows_from_the_farthest_pair(self):
        assert compute_ordering(alignment_with_distances(), "furthest") == [1, 2, 0]

    def test_ties_break_to_the_lowest_index(self):
        aln = np.zeros((4, 6), dtype=int)
        assert compute_ordering(aln, "nearest") == [0, 1, 2, 3]
        assert compute_ordering(aln, "furthest") == [0, 1, 2, 3]

    def test_four_rows_nearest(self):
        # chain 0 -1- 1 -2- 2 -3- 3 by pairwise SNP separation
        row = lambda *idx: [1 if i in idx else 0 for i in range(10)]
        aln = np.array([row(), row(0), row(0, 1, 2), row(0, 1, 2, 3, 4, 5)])
        assert compute_ordering(aln, "nearest") == [0, 1, 2, 3]
        assert compute_ordering(aln, "furthest") == [0, 3, 1, 2]

    def test_small_inputs_pass_through(self):
        assert compute_ordering(np.zeros((1, 4), dtype=int), "nearest") == [0]
        assert compute_ordering(np.zeros((0, 4), dtype=int), "furthest") == []

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            compute_ordering(np.zeros((2, 4), dtype=int), "random")
