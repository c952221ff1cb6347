"""Shared fixtures: the two hand-built tree models every mapping example uses
(T0: one branch, T1: a chain), bundled datasets, and small trained forests."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

import treecam as tc
from treecam.ensemble import Condition, Ensemble, MAJORITY_VOTE, Tree, TreeNode

DATA_DIR = Path(__file__).resolve().parent.parent / "data"

C0 = Condition(0, 0.5)
C1 = Condition(1, 2.0)
CA = Condition(0, 1.0)
CB = Condition(1, 2.0)
CC = Condition(2, 3.0)


def leaf(cls, count=1, purity=1.0):
    return TreeNode(sample_count=count, majority_class=cls, purity=purity)


def internal(cond, left, right, cls=0, purity=0.5, count=None):
    if count is None:
        count = left.sample_count + right.sample_count
    return TreeNode(sample_count=count, majority_class=cls, purity=purity,
                    condition=cond, left=left, right=right)


def single_tree_ensemble(root, class_count, feature_count, n_train=0):
    tree = Tree(root, np.empty(0, np.int64), np.empty(0, np.int64))
    return Ensemble(trees=[tree], aggregation=MAJORITY_VOTE,
                    class_count=class_count, feature_count=feature_count)


@pytest.fixture
def t0_ensemble():
    """Root c0=(f0 <= 0.5): left leaf A(0); right subtree c1=(f1 <= 2.0):
    left leaf B(1), right leaf C(2)."""
    sub = internal(C1, leaf(1, 3), leaf(2, 4), cls=2, purity=4 / 7)
    root = internal(C0, leaf(0, 5), sub, cls=0, purity=5 / 12)
    return single_tree_ensemble(root, class_count=3, feature_count=2)


@pytest.fixture
def t1_ensemble():
    """Chain tree with paths {cA:1}, {cA:0,cB:1}, {cA:0,cB:0,cC:1},
    {cA:0,cB:0,cC:0}."""
    inner = internal(CC, leaf(0, 2), leaf(1, 2), cls=0, purity=0.5)
    mid = internal(CB, leaf(1, 3), inner, cls=1, purity=3 / 7)
    root = internal(CA, leaf(0, 5), mid, cls=0, purity=5 / 12)
    return single_tree_ensemble(root, class_count=2, feature_count=3)


@pytest.fixture
def t0_paths(t0_ensemble):
    return tc.extract_paths(t0_ensemble)


@pytest.fixture
def t1_paths(t1_ensemble):
    return tc.extract_paths(t1_ensemble)


@pytest.fixture(scope="session")
def blobs2():
    return tc.load_dataset(DATA_DIR / "blobs2.csv")


@pytest.fixture(scope="session")
def blobs3():
    return tc.load_dataset(DATA_DIR / "blobs3.csv")


@pytest.fixture(scope="session")
def blobs3_forest(blobs3):
    return tc.train_forest(blobs3, tc.TrainingParams(num_trees=15, seed=11))


@pytest.fixture(scope="session")
def margin_binary():
    return tc.load_ensemble(DATA_DIR / "fixtures" / "margin_binary.json")


@pytest.fixture(scope="session")
def margin_multiclass():
    return tc.load_ensemble(DATA_DIR / "fixtures" / "margin_multiclass.json")


def random_forest_from_seed(seed, num_trees=4, instances=40, features=3,
                            classes=3, max_depth=None):
    """Small deterministic random forest for property tests."""
    rng = np.random.default_rng(seed)
    X = rng.normal(0, 2, size=(instances, features))
    y = rng.integers(0, classes, size=instances)
    dataset = tc.Dataset.from_arrays(X, y, class_count=classes)
    params = tc.TrainingParams(num_trees=num_trees, seed=seed,
                               max_depth=max_depth)
    return dataset, tc.train_forest(dataset, params)


# --- independent oracles used across test modules ---------------------------

def oracle_traverse(node, instance):
    """Recursive traversal coded independently of the library's walker."""
    if node.condition is None:
        return node
    if instance[node.condition.feature] <= node.condition.threshold:
        return oracle_traverse(node.left, instance)
    return oracle_traverse(node.right, instance)


def oracle_vote_predict(ensemble, instance):
    counts = {}
    for tree in ensemble.trees:
        cls = oracle_traverse(tree.root, instance).majority_class
        counts[cls] = counts.get(cls, 0) + 1
    best = max(counts.values())
    return min(c for c, k in counts.items() if k == best)


def oracle_prune(node, theta):
    """Independent recursive cut at the first node with purity >= theta."""
    if node.purity >= theta:
        return TreeNode(sample_count=node.sample_count,
                        majority_class=node.majority_class, purity=node.purity)
    if node.condition is None:
        return node
    return TreeNode(sample_count=node.sample_count,
                    majority_class=node.majority_class, purity=node.purity,
                    condition=node.condition,
                    left=oracle_prune(node.left, theta),
                    right=oracle_prune(node.right, theta))
