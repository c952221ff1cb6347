"""Bagged decision-tree ensembles: CART training with bootstrap/OOB tracking,
per-node majority/purity annotation, and the reference traversal predictor.

Trees split on "feature <= threshold" with the true branch going left;
thresholds are midpoints between adjacent distinct sorted values so encoding
into condition bits is unambiguous.
"""

from __future__ import annotations

import sys
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DataError
from .validation import as_feature_matrix, as_label_vector, check_instance

MAJORITY_VOTE = "majority_vote"
MARGIN_SUM = "margin_sum"

AGGREGATIONS = (MAJORITY_VOTE, MARGIN_SUM)


@dataclass(frozen=True, order=True)
class Condition:
    """A split predicate: true iff instance[feature] <= threshold."""

    feature: int
    threshold: float

    def holds(self, instance) -> bool:
        return float(instance[self.feature]) <= self.threshold


@dataclass(eq=True)
class TreeNode:
    """One tree node. Internal nodes carry a condition and two children; leaves
    carry a prediction (majority_class for vote trees, leaf_value for margin
    trees). majority_class/purity/sample_count are training annotations and may
    be None on ingested margin models. Nodes are never mutated after build."""

    sample_count: int
    majority_class: Optional[int]
    purity: Optional[float]
    condition: Optional[Condition] = None
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None
    leaf_value: Optional[float] = None

    @property
    def is_leaf(self) -> bool:
        return self.condition is None

    @property
    def prediction(self):
        """Leaf payload: class id for vote trees, real value for margin trees."""
        return self.leaf_value if self.leaf_value is not None else self.majority_class


@dataclass
class Dataset:
    """Training data: (n, F) float features, int class labels, optional
    per-class weights (enter Gini and purity; default all ones)."""

    feature_matrix: np.ndarray
    labels: np.ndarray
    class_count: int
    class_weights: np.ndarray
    label_names: Optional[list[str]] = None

    @classmethod
    def from_arrays(cls, X, y, class_count=None, class_weights=None,
                    label_names=None) -> "Dataset":
        X = as_feature_matrix(X)
        y = as_label_vector(y)
        if class_count is None:
            class_count = int(y.max()) + 1
        y = as_label_vector(y, class_count)
        if X.shape[0] != y.shape[0]:
            raise DataError(
                f"feature matrix has {X.shape[0]} rows but {y.shape[0]} labels"
            )
        if class_weights is None:
            w = np.ones(class_count, dtype=np.float64)
        else:
            w = np.asarray(class_weights, dtype=np.float64)
            if w.shape != (class_count,):
                raise DataError(
                    f"class_weights must have shape ({class_count},), got {w.shape}"
                )
            if not (np.isfinite(w).all() and (w > 0).all()):
                raise DataError("class weights must be positive and finite")
        return cls(X, y, class_count, w, label_names)

    @property
    def instance_count(self) -> int:
        return self.feature_matrix.shape[0]

    @property
    def feature_count(self) -> int:
        return self.feature_matrix.shape[1]

    def balanced_weights(self) -> np.ndarray:
        """Inverse-frequency class weights: n / (C * count_c)."""
        counts = np.bincount(self.labels, minlength=self.class_count)
        counts = np.maximum(counts, 1)
        return self.instance_count / (self.class_count * counts.astype(np.float64))

    def split(self, test_fraction: float, seed: int) -> tuple["Dataset", "Dataset"]:
        """Deterministic train/test split; test gets round(n * test_fraction) rows."""
        n = self.instance_count
        rng = np.random.default_rng(seed)
        perm = rng.permutation(n)
        n_test = int(round(n * test_fraction))
        if n_test < 1 or n_test >= n:
            raise DataError(f"test_fraction {test_fraction} leaves an empty side")
        test_idx, train_idx = perm[:n_test], perm[n_test:]
        make = lambda idx: Dataset(
            self.feature_matrix[idx], self.labels[idx], self.class_count,
            self.class_weights, self.label_names)
        return make(np.sort(train_idx)), make(np.sort(test_idx))


@dataclass
class TrainingParams:
    num_trees: int
    seed: int
    mtry: Optional[int] = None
    min_samples_leaf: int = 1
    max_depth: Optional[int] = None


class _FlatTree:
    """Array form of a tree for vectorized batch traversal."""

    __slots__ = ("feature", "threshold", "left", "right", "leaf_class", "leaf_value")

    def __init__(self, root: TreeNode):
        nodes = []
        stack = [root]
        while stack:
            node = stack.pop()
            nodes.append(node)
            if not node.is_leaf:
                stack.append(node.right)
                stack.append(node.left)
        index = {id(n): i for i, n in enumerate(nodes)}
        n = len(nodes)
        self.feature = np.full(n, -1, dtype=np.int32)
        self.threshold = np.zeros(n, dtype=np.float64)
        self.left = np.zeros(n, dtype=np.int32)
        self.right = np.zeros(n, dtype=np.int32)
        self.leaf_class = np.full(n, -1, dtype=np.int32)
        self.leaf_value = np.full(n, np.nan, dtype=np.float64)
        for i, node in enumerate(nodes):
            if node.is_leaf:
                if node.majority_class is not None:
                    self.leaf_class[i] = node.majority_class
                if node.leaf_value is not None:
                    self.leaf_value[i] = node.leaf_value
            else:
                self.feature[i] = node.condition.feature
                self.threshold[i] = node.condition.threshold
                self.left[i] = index[id(node.left)]
                self.right[i] = index[id(node.right)]

    def leaf_indices(self, X: np.ndarray) -> np.ndarray:
        cur = np.zeros(X.shape[0], dtype=np.int32)
        active = np.nonzero(self.feature[cur] >= 0)[0]
        while active.size:
            nd = cur[active]
            go_left = X[active, self.feature[nd]] <= self.threshold[nd]
            cur[active] = np.where(go_left, self.left[nd], self.right[nd])
            active = active[self.feature[cur[active]] >= 0]
        return cur


class Tree:
    """A trained tree plus its bootstrap bookkeeping (in_bag multiset, oob set)."""

    __slots__ = ("root", "in_bag", "oob", "_flat")

    def __init__(self, root: TreeNode, in_bag: np.ndarray, oob: np.ndarray):
        self.root = root
        self.in_bag = np.asarray(in_bag, dtype=np.int64)
        self.oob = np.asarray(oob, dtype=np.int64)
        self._flat = None

    @property
    def flat(self) -> _FlatTree:
        if self._flat is None:
            self._flat = _FlatTree(self.root)
        return self._flat

    def predict_classes(self, X: np.ndarray) -> np.ndarray:
        return self.flat.leaf_class[self.flat.leaf_indices(X)]

    def predict_values(self, X: np.ndarray) -> np.ndarray:
        return self.flat.leaf_value[self.flat.leaf_indices(X)]

    def __eq__(self, other):
        return (isinstance(other, Tree) and self.root == other.root
                and np.array_equal(self.in_bag, other.in_bag)
                and np.array_equal(self.oob, other.oob))


@dataclass
class Ensemble:
    """Trained or ingested tree ensemble.

    aggregation is majority_vote for bagging-trained forests and margin_sum for
    ingested boosted models. Margin models carry base_score and, for more than
    two classes, a per-tree class assignment.
    """

    trees: list[Tree]
    aggregation: str
    class_count: int
    feature_count: int
    base_score: float = 0.0
    tree_classes: Optional[list[int]] = None
    training_params: Optional[TrainingParams] = None

    def __post_init__(self):
        if self.aggregation not in AGGREGATIONS:
            raise DataError(f"unknown aggregation mode: {self.aggregation!r}")
        if len(self.trees) < 1:
            raise DataError("ensemble must contain at least one tree")

    @property
    def tree_count(self) -> int:
        return len(self.trees)

    def has_purity_annotations(self) -> bool:
        def annotated(node):
            if node.purity is None or node.majority_class is None:
                return False
            if node.is_leaf:
                return True
            return annotated(node.left) and annotated(node.right)

        _raise_recursion_limit()
        return all(annotated(t.root) for t in self.trees)


def _raise_recursion_limit(limit: int = 20000):
    if sys.getrecursionlimit() < limit:
        sys.setrecursionlimit(limit)


def _grow_tree(X, y, inst_weight, node_idx, depth, rng, mtry, min_leaf,
               max_depth, class_count) -> TreeNode:
    labels = y[node_idx]
    weights = inst_weight[node_idx]
    counts = np.bincount(labels, weights=weights, minlength=class_count)
    majority = int(np.argmax(counts))
    total_w = counts.sum()
    purity = float(counts[majority] / total_w)

    def leaf():
        return TreeNode(sample_count=len(node_idx), majority_class=majority,
                        purity=purity)

    if purity >= 1.0 or len(node_idx) < 2 * min_leaf:
        return leaf()
    if max_depth is not None and depth >= max_depth:
        return leaf()

    # Try mtry random features first; if none yields a valid split, keep
    # scanning the rest of the permutation so divisible nodes always split.
    feature_order = rng.permutation(X.shape[1])
    best = None  # (score, feature, threshold)
    examined = 0
    for f in feature_order:
        examined += 1
        cand = _best_split_for_feature(
            X[node_idx, f], labels, weights, class_count, min_leaf)
        if cand is not None:
            score, thr = cand
            if best is None or score < best[0]:
                best = (score, int(f), thr)
        if examined >= mtry and best is not None:
            break
    if best is None:
        return leaf()

    _, f, thr = best
    go_left = X[node_idx, f] <= thr
    left = _grow_tree(X, y, inst_weight, node_idx[go_left], depth + 1, rng,
                      mtry, min_leaf, max_depth, class_count)
    right = _grow_tree(X, y, inst_weight, node_idx[~go_left], depth + 1, rng,
                       mtry, min_leaf, max_depth, class_count)
    return TreeNode(sample_count=len(node_idx), majority_class=majority,
                    purity=purity, condition=Condition(f, float(thr)),
                    left=left, right=right)


def _best_split_for_feature(values, labels, weights, class_count, min_leaf):
    """Best midpoint split of one feature by weighted Gini; None if no valid cut."""
    order = np.argsort(values, kind="stable")
    v = values[order]
    if v[0] == v[-1]:
        return None
    lab = labels[order]
    w = weights[order]
    n = len(v)
    boundaries = np.nonzero(v[:-1] < v[1:])[0]
    if min_leaf > 1:
        keep = (boundaries + 1 >= min_leaf) & (n - boundaries - 1 >= min_leaf)
        boundaries = boundaries[keep]
        if boundaries.size == 0:
            return None
    onehot = np.zeros((n, class_count), dtype=np.float64)
    onehot[np.arange(n), lab] = w
    cum = np.cumsum(onehot, axis=0)
    total = cum[-1]
    left_counts = cum[boundaries]
    left_w = left_counts.sum(axis=1)
    right_counts = total - left_counts
    right_w = right_counts.sum(axis=1)
    gini_left = 1.0 - ((left_counts / left_w[:, None]) ** 2).sum(axis=1)
    gini_right = 1.0 - ((right_counts / right_w[:, None]) ** 2).sum(axis=1)
    score = left_w * gini_left + right_w * gini_right
    k = int(np.argmin(score))
    i = boundaries[k]
    lo, hi = v[i], v[i + 1]
    thr = (lo + hi) / 2.0
    if not (lo <= thr < hi):  # float midpoint rounded onto hi
        thr = lo
    return float(score[k]), float(thr)


def train_forest(dataset: Dataset, params: TrainingParams) -> Ensemble:
    """Train a bagged forest of fully grown CART trees (Gini, random feature
    subset per split, midpoint thresholds). Deterministic for a fixed seed:
    per-tree RNGs are spawned from the master seed independent of scheduling."""
    if params.num_trees < 1:
        raise DataError("num_trees must be >= 1")
    if params.seed is None:
        raise DataError("training seed must be supplied")
    X = dataset.feature_matrix
    y = dataset.labels
    n = dataset.instance_count
    if len(np.unique(y)) == 1:
        warnings.warn("single-class dataset: trees degenerate to root leaves")
    mtry = params.mtry
    if mtry is None:
        mtry = int(np.ceil(np.sqrt(dataset.feature_count)))
    mtry = max(1, min(mtry, dataset.feature_count))
    inst_weight = dataset.class_weights[y]

    _raise_recursion_limit()
    children = np.random.SeedSequence(params.seed).spawn(params.num_trees)
    trees = []
    all_idx = np.arange(n)
    for child in children:
        rng = np.random.default_rng(child)
        in_bag = rng.integers(0, n, size=n)
        oob = np.setdiff1d(all_idx, in_bag)
        root = _grow_tree(X, y, inst_weight, np.sort(in_bag), 0, rng, mtry,
                          params.min_samples_leaf, params.max_depth,
                          dataset.class_count)
        trees.append(Tree(root, in_bag, oob))
    return Ensemble(trees=trees, aggregation=MAJORITY_VOTE,
                    class_count=dataset.class_count,
                    feature_count=dataset.feature_count,
                    training_params=params)


def traverse(node: TreeNode, instance) -> TreeNode:
    """Reference traversal: walk conditions to the leaf an instance reaches."""
    while not node.is_leaf:
        node = node.left if node.condition.holds(instance) else node.right
    return node


def predict(ensemble: Ensemble, instance):
    """Reference single-instance prediction.

    majority_vote: class id, ties toward the lowest class id.
    margin_sum: scalar margin for binary models, per-class margin vector
    otherwise.
    """
    x = check_instance(instance, ensemble.feature_count)
    leaves = [traverse(t.root, x) for t in ensemble.trees]
    if ensemble.aggregation == MAJORITY_VOTE:
        votes = np.bincount([leaf.majority_class for leaf in leaves],
                            minlength=ensemble.class_count)
        return int(np.argmax(votes))
    values = [leaf.leaf_value for leaf in leaves]
    if any(v is None for v in values):
        raise DataError("margin_sum ensemble has a leaf without a value")
    if ensemble.tree_classes is None:
        return ensemble.base_score + float(np.sum(values))
    margins = np.full(ensemble.class_count, ensemble.base_score, dtype=np.float64)
    for cls, v in zip(ensemble.tree_classes, values):
        margins[cls] += v
    return margins


def predict_batch(ensemble: Ensemble, X) -> np.ndarray:
    """Vectorized prediction for many instances; same semantics as predict.

    Returns (n,) class ids for vote models, (n,) margins for binary margin
    models, and (n, class_count) margins for multi-class margin models.
    """
    X = as_feature_matrix(X)
    if X.shape[1] != ensemble.feature_count:
        raise DataError(
            f"instances have {X.shape[1]} features, expected {ensemble.feature_count}")
    if ensemble.aggregation == MAJORITY_VOTE:
        votes = np.zeros((X.shape[0], ensemble.class_count), dtype=np.int64)
        rows = np.arange(X.shape[0])
        for tree in ensemble.trees:
            votes[rows, tree.predict_classes(X)] += 1
        return np.argmax(votes, axis=1)
    if ensemble.tree_classes is None:
        total = np.full(X.shape[0], ensemble.base_score, dtype=np.float64)
        for tree in ensemble.trees:
            total += tree.predict_values(X)
        return total
    margins = np.full((X.shape[0], ensemble.class_count), ensemble.base_score,
                      dtype=np.float64)
    for cls, tree in zip(ensemble.tree_classes, ensemble.trees):
        margins[:, cls] += tree.predict_values(X)
    return margins


def classify(ensemble: Ensemble, X) -> np.ndarray:
    """Hard class predictions for any aggregation mode (binary margin: > 0)."""
    out = predict_batch(ensemble, X)
    if ensemble.aggregation == MAJORITY_VOTE:
        return out
    if out.ndim == 1:
        return (out > 0).astype(np.int64)
    return np.argmax(out, axis=1)


def accuracy(ensemble: Ensemble, X, y) -> float:
    y = as_label_vector(y, ensemble.class_count)
    return float(np.mean(classify(ensemble, X) == y))


def oob_accuracy(ensemble: Ensemble, dataset: Dataset, weighted: bool = False) -> float:
    """Out-of-bag accuracy: each instance is judged by the majority vote of the
    trees that did not train on it; instances with no OOB tree are skipped."""
    if ensemble.aggregation != MAJORITY_VOTE:
        raise DataError("OOB estimation requires a bagging-trained ensemble")
    n = dataset.instance_count
    X = dataset.feature_matrix
    votes = np.zeros((n, ensemble.class_count), dtype=np.int64)
    for tree in ensemble.trees:
        if tree.oob.size == 0:
            continue
        preds = tree.predict_classes(X[tree.oob])
        votes[tree.oob, preds] += 1
    covered = votes.sum(axis=1) > 0
    if not covered.any():
        raise DataError("no OOB coverage")
    pred = np.argmax(votes[covered], axis=1)
    correct = pred == dataset.labels[covered]
    if not weighted:
        return float(np.mean(correct))
    w = dataset.class_weights[dataset.labels[covered]]
    return float(np.sum(w * correct) / np.sum(w))
