"""Training, traversal, and OOB estimation against independent oracles."""

from __future__ import annotations

import numpy as np
import pytest

import treecam as tc
from treecam.datasets import linearly_separable, make_named
from treecam.ensemble import Condition, Ensemble, MARGIN_SUM, Tree, TreeNode
from treecam.errors import DataError

from conftest import oracle_traverse, oracle_vote_predict


def test_single_instance_single_tree_is_root_leaf():
    ds = tc.Dataset.from_arrays([[1.0, 2.0]], [1], class_count=2)
    with pytest.warns(UserWarning):
        ensemble = tc.train_forest(ds, tc.TrainingParams(num_trees=1, seed=0))
    root = ensemble.trees[0].root
    assert root.is_leaf
    assert root.majority_class == 1
    assert root.purity == 1.0


def test_separable_toy_set_trains_depth_one_trees():
    ds = linearly_separable(20)
    ensemble = tc.train_forest(ds, tc.TrainingParams(num_trees=5, seed=7))
    for tree in ensemble.trees:
        assert not tree.root.is_leaf
        assert tree.root.left.is_leaf and tree.root.right.is_leaf
    assert tc.accuracy(ensemble, ds.feature_matrix, ds.labels) == 1.0


def test_reject_non_finite_features():
    with pytest.raises(DataError, match="non-finite"):
        tc.Dataset.from_arrays([[np.nan, 1.0]], [0])


def test_training_is_deterministic():
    ds = make_named("blobs3")
    params = tc.TrainingParams(num_trees=6, seed=42)
    a = tc.train_forest(ds, params)
    b = tc.train_forest(ds, params)
    assert all(x == y for x, y in zip(a.trees, b.trees))


def test_different_seeds_differ():
    ds = make_named("blobs3")
    a = tc.train_forest(ds, tc.TrainingParams(num_trees=3, seed=1))
    b = tc.train_forest(ds, tc.TrainingParams(num_trees=3, seed=2))
    assert any(x != y for x, y in zip(a.trees, b.trees))


def test_fully_grown_leaves_pure_or_indivisible(blobs3, blobs3_forest):
    X = blobs3.feature_matrix

    def check(node, rows):
        if node.is_leaf:
            if node.purity < 1.0:
                # indivisible: all remaining rows share one feature vector
                assert np.all(X[rows] == X[rows[0]])
            return
        mask = X[rows, node.condition.feature] <= node.condition.threshold
        check(node.left, rows[mask])
        check(node.right, rows[~mask])

    for tree in blobs3_forest.trees:
        check(tree.root, np.sort(tree.in_bag))


def test_purity_annotation_recomputable(blobs3, blobs3_forest):
    """purity * weight(node) equals the weighted majority count when training
    instances are replayed through the tree."""
    X, y = blobs3.feature_matrix, blobs3.labels

    def check(node, rows):
        labels = y[rows]
        counts = np.bincount(labels, minlength=blobs3.class_count)
        assert node.sample_count == rows.size
        assert node.majority_class == int(np.argmax(counts))
        assert node.purity == pytest.approx(counts.max() / rows.size)
        if not node.is_leaf:
            mask = X[rows, node.condition.feature] <= node.condition.threshold
            check(node.left, rows[mask])
            check(node.right, rows[~mask])

    for tree in blobs3_forest.trees:
        check(tree.root, np.sort(tree.in_bag))


def test_predict_matches_independent_recursive_traversal(blobs3, blobs3_forest):
    rng = np.random.default_rng(3)
    X = rng.normal(0, 3, size=(200, blobs3.feature_count))
    batch = tc.predict_batch(blobs3_forest, X)
    for i, x in enumerate(X):
        assert tc.predict(blobs3_forest, x) == oracle_vote_predict(blobs3_forest, x)
        assert batch[i] == oracle_vote_predict(blobs3_forest, x)


def test_predict_t0_fixture(t0_ensemble):
    assert tc.predict(t0_ensemble, [0.4, 9.9]) == 0  # leaf A
    assert tc.predict(t0_ensemble, [0.6, 1.0]) == 1  # leaf B
    assert tc.predict(t0_ensemble, [0.6, 9.9]) == 2  # leaf C


def test_constant_stump_predicts_constant():
    root = TreeNode(sample_count=4, majority_class=2, purity=1.0)
    tree = Tree(root, np.empty(0, np.int64), np.empty(0, np.int64))
    ensemble = Ensemble(trees=[tree], aggregation="majority_vote",
                        class_count=3, feature_count=2)
    for x in ([0.0, 0.0], [9.0, -9.0]):
        assert tc.predict(ensemble, x) == 2


def test_margin_sum_of_two_stumps():
    def stump(thr, lo, hi):
        root = TreeNode(sample_count=0, majority_class=None, purity=None,
                        condition=Condition(0, thr),
                        left=TreeNode(0, None, None, leaf_value=lo),
                        right=TreeNode(0, None, None, leaf_value=hi))
        return Tree(root, np.empty(0, np.int64), np.empty(0, np.int64))

    ensemble = Ensemble(trees=[stump(0.0, -0.3, 0.3), stump(0.0, -0.1, 0.1)],
                        aggregation=MARGIN_SUM, class_count=2,
                        feature_count=1, base_score=0.5)
    assert tc.predict(ensemble, [1.0]) == pytest.approx(0.9)
    assert tc.predict(ensemble, [-1.0]) == pytest.approx(0.1)


def test_vote_tie_breaks_toward_lowest_class():
    stump_a = Tree(TreeNode(1, 1, 1.0), np.empty(0, np.int64), np.empty(0, np.int64))
    stump_b = Tree(TreeNode(1, 0, 1.0), np.empty(0, np.int64), np.empty(0, np.int64))
    ensemble = Ensemble(trees=[stump_a, stump_b], aggregation="majority_vote",
                        class_count=2, feature_count=1)
    assert tc.predict(ensemble, [0.0]) == 0


def test_oob_accuracy_matches_brute_force(blobs3, blobs3_forest):
    X, y = blobs3.feature_matrix, blobs3.labels
    correct = covered = 0
    for i in range(blobs3.instance_count):
        counts = {}
        for tree in blobs3_forest.trees:
            if i in set(tree.oob.tolist()):
                cls = oracle_traverse(tree.root, X[i]).majority_class
                counts[cls] = counts.get(cls, 0) + 1
        if not counts:
            continue
        covered += 1
        best = max(counts.values())
        if min(c for c, k in counts.items() if k == best) == y[i]:
            correct += 1
    assert covered > 0
    assert tc.oob_accuracy(blobs3_forest, blobs3) == pytest.approx(correct / covered)


def test_oob_error_when_no_coverage():
    ds = tc.Dataset.from_arrays([[0.0], [1.0]], [0, 1], class_count=2)
    root = TreeNode(sample_count=2, majority_class=0, purity=0.5)
    tree = Tree(root, np.array([0, 1]), np.empty(0, np.int64))
    ensemble = Ensemble(trees=[tree], aggregation="majority_vote",
                        class_count=2, feature_count=1)
    with pytest.raises(DataError, match="no OOB coverage"):
        tc.oob_accuracy(ensemble, ds)


def test_oob_perfect_single_oob_tree_each():
    # two stumps; every instance is OOB for exactly one tree, which is perfect
    ds = tc.Dataset.from_arrays([[-1.0], [1.0]], [0, 1], class_count=2)
    good = TreeNode(2, 0, 0.5, condition=Condition(0, 0.0),
                    left=TreeNode(1, 0, 1.0), right=TreeNode(1, 1, 1.0))
    t_a = Tree(good, np.array([1, 1]), np.array([0]))
    t_b = Tree(good, np.array([0, 0]), np.array([1]))
    ensemble = Ensemble(trees=[t_a, t_b], aggregation="majority_vote",
                        class_count=2, feature_count=1)
    assert tc.oob_accuracy(ensemble, ds) == 1.0


def test_oob_close_to_test_accuracy_on_desk_dataset():
    ds = tc.load_dataset("data/creditlike.csv")
    train, test = ds.split(0.3, 73)
    ensemble = tc.train_forest(train, tc.TrainingParams(num_trees=100, seed=5))
    oob = tc.oob_accuracy(ensemble, train)
    test_acc = tc.accuracy(ensemble, test.feature_matrix, test.labels)
    assert abs(oob - test_acc) <= 0.05


def test_weighted_purity_recomputable_by_replay():
    """With class weights, node purity is the weighted majority share of the
    training instances replayed through the tree."""
    ds = make_named("blobs2")
    weighted = tc.Dataset.from_arrays(ds.feature_matrix, ds.labels,
                                      class_count=ds.class_count,
                                      class_weights=np.array([1.0, 3.0]))
    forest = tc.train_forest(weighted, tc.TrainingParams(num_trees=4, seed=6))
    X, y, w = weighted.feature_matrix, weighted.labels, weighted.class_weights

    def check(node, rows):
        counts = np.bincount(y[rows], weights=w[y[rows]],
                             minlength=weighted.class_count)
        assert node.majority_class == int(np.argmax(counts))
        assert node.purity == pytest.approx(counts.max() / counts.sum())
        if not node.is_leaf:
            mask = X[rows, node.condition.feature] <= node.condition.threshold
            check(node.left, rows[mask])
            check(node.right, rows[~mask])

    for tree in forest.trees:
        check(tree.root, np.sort(tree.in_bag))


def test_class_weights_change_training():
    ds = make_named("adultlike")
    plain = tc.train_forest(ds, tc.TrainingParams(num_trees=3, seed=9))
    weighted_ds = tc.Dataset.from_arrays(ds.feature_matrix, ds.labels,
                                         class_count=ds.class_count,
                                         class_weights=ds.balanced_weights())
    weighted = tc.train_forest(weighted_ds, tc.TrainingParams(num_trees=3, seed=9))
    assert any(a != b for a, b in zip(plain.trees, weighted.trees))


def test_mtry_and_depth_params_respected(blobs3):
    shallow = tc.train_forest(
        blobs3, tc.TrainingParams(num_trees=4, seed=2, max_depth=2))

    def depth(node):
        if node.is_leaf:
            return 0
        return 1 + max(depth(node.left), depth(node.right))

    assert all(depth(t.root) <= 2 for t in shallow.trees)
