"""Purity threshold pruning: convert every shallowest node whose purity meets
a threshold into a majority-class leaf, and search for the minimum threshold
that keeps OOB accuracy within a user tolerance."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .ensemble import (Dataset, Ensemble, MAJORITY_VOTE, Tree, TreeNode,
                       _raise_recursion_limit, oob_accuracy)
from .errors import DataError, InvariantError
from .pathspace import extract_paths

# Sentinel candidate just above any attainable purity: "prune nothing".
NO_PRUNE_THRESHOLD = math.nextafter(1.0, 2.0)

SEARCH_BINARY = "binary"
SEARCH_EXHAUSTIVE = "exhaustive"


@dataclass
class PruneResult:
    threshold: float
    pruned: Ensemble
    oob_before: float
    oob_after: float
    nodes_removed: int


@dataclass
class ModelComplexity:
    path_count: int
    unique_condition_count: int
    avg_path_length: float


def _check_prunable(ensemble: Ensemble):
    if ensemble.aggregation != MAJORITY_VOTE or not ensemble.has_purity_annotations():
        raise DataError("pruning requires bagging-trained ensemble")


def _count_nodes(node: TreeNode) -> int:
    if node.is_leaf:
        return 1
    return 1 + _count_nodes(node.left) + _count_nodes(node.right)


def _cut(node: TreeNode, theta: float):
    """Return (new_node, nodes_removed); shares untouched subtrees."""
    if node.purity >= theta:
        if node.is_leaf:
            return node, 0
        leaf = TreeNode(sample_count=node.sample_count,
                        majority_class=node.majority_class,
                        purity=node.purity)
        return leaf, _count_nodes(node) - 1
    if node.is_leaf:
        return node, 0
    left, removed_l = _cut(node.left, theta)
    right, removed_r = _cut(node.right, theta)
    if removed_l == 0 and removed_r == 0:
        return node, 0
    new = TreeNode(sample_count=node.sample_count,
                   majority_class=node.majority_class, purity=node.purity,
                   condition=node.condition, left=left, right=right)
    return new, removed_l + removed_r


def prune_with_threshold(ensemble: Ensemble, theta: float) -> Ensemble:
    """Top-down cut: the shallowest node with purity >= theta becomes a leaf
    predicting its majority class. The input ensemble is left unmodified."""
    if not (0.0 < theta):
        raise DataError(f"purity threshold must be positive, got {theta}")
    _check_prunable(ensemble)
    _raise_recursion_limit()
    pruned, _ = _prune_counting(ensemble, theta)
    return pruned


def _prune_counting(ensemble: Ensemble, theta: float):
    removed_total = 0
    trees = []
    for tree in ensemble.trees:
        root, removed = _cut(tree.root, theta)
        removed_total += removed
        trees.append(tree if removed == 0 else Tree(root, tree.in_bag, tree.oob))
    if removed_total == 0:
        return ensemble, 0
    return replace(ensemble, trees=trees), removed_total


def distinct_internal_purities(ensemble: Ensemble) -> list[float]:
    """Ascending distinct purity values over all internal nodes."""
    seen = set()

    def collect(node):
        if node.is_leaf:
            return
        seen.add(node.purity)
        collect(node.left)
        collect(node.right)

    _raise_recursion_limit()
    for tree in ensemble.trees:
        collect(tree.root)
    return sorted(seen)


def purity_threshold_prune(ensemble: Ensemble, dataset: Dataset,
                           tolerance: float, search: str = SEARCH_BINARY,
                           weighted: bool = False) -> PruneResult:
    """Find the minimum purity threshold whose pruned ensemble keeps OOB
    accuracy within tolerance of the unpruned ensemble, and apply it.

    Candidates are the distinct internal-node purities plus a no-prune
    sentinel; any threshold between consecutive distinct values prunes
    identically, so the set is complete. The default binary search assumes
    OOB accuracy is non-decreasing in the threshold; the exhaustive mode
    scans candidates in ascending order and stops at the first acceptable
    one, which is the exact minimum with no monotonicity assumption.
    """
    if not (0.0 <= tolerance < 1.0):
        raise DataError(f"tolerance must be in [0, 1), got {tolerance}")
    if search not in (SEARCH_BINARY, SEARCH_EXHAUSTIVE):
        raise DataError(f"unknown search mode: {search!r}")
    _check_prunable(ensemble)
    oob_before = oob_accuracy(ensemble, dataset, weighted=weighted)

    candidates = distinct_internal_purities(ensemble)
    candidates.append(NO_PRUNE_THRESHOLD)

    cache: dict[float, tuple[Ensemble, int, float]] = {}

    def evaluate(theta):
        if theta not in cache:
            pruned, removed = _prune_counting(ensemble, theta)
            cache[theta] = (pruned, removed, oob_accuracy(pruned, dataset,
                                                          weighted=weighted))
        return cache[theta]

    def accepted(theta):
        _, _, acc = evaluate(theta)
        return oob_before - acc <= tolerance

    if search == SEARCH_BINARY:
        lo, hi = -1, len(candidates) - 1
        if not accepted(candidates[hi]):
            raise InvariantError("no-prune sentinel failed its own OOB check")
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if accepted(candidates[mid]):
                hi = mid
            else:
                lo = mid
        theta = candidates[hi]
    else:
        theta = None
        for cand in candidates:
            if accepted(cand):
                theta = cand
                break
        if theta is None:
            raise InvariantError("no-prune sentinel failed its own OOB check")

    pruned, removed, oob_after = evaluate(theta)
    return PruneResult(threshold=theta, pruned=pruned, oob_before=oob_before,
                       oob_after=oob_after, nodes_removed=removed)


def model_complexity(ensemble: Ensemble) -> ModelComplexity:
    """Path and unique-condition counts driving CAM capacity requirements."""
    ps = extract_paths(ensemble)
    return ModelComplexity(path_count=ps.path_count,
                           unique_condition_count=ps.index.unique_condition_count,
                           avg_path_length=ps.avg_path_length)
