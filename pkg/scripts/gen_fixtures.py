#!/usr/bin/env python3
"""Materialize the bundled fixtures: synthetic dataset CSVs under data/ and
margin-sum ensemble documents under data/fixtures/. Deterministic; run from
the repository root after changing treecam.datasets specs."""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from treecam.datasets import DESK_SPECS, SMALL_SPECS, make_synthetic
from treecam.ensemble import Ensemble, MARGIN_SUM, Tree, TreeNode, Condition
from treecam.formats import save_dataset, save_ensemble

ROOT = Path(__file__).resolve().parent.parent
DATA = ROOT / "data"
FIXTURES = DATA / "fixtures"


def random_margin_tree(rng, feature_count, max_depth):
    """A random decision stump/tree with grid-quantized thresholds so that
    conditions repeat across trees, as boosted dumps do in practice."""

    def grow(depth, used):
        if depth >= max_depth or rng.random() < 0.25 * depth:
            return TreeNode(sample_count=0, majority_class=None, purity=None,
                            leaf_value=float(np.round(rng.normal(0, 0.3), 6)))
        while True:
            cond = Condition(int(rng.integers(feature_count)),
                             float(np.round(rng.uniform(0, 1), 1)))
            if cond not in used:
                break
        left = grow(depth + 1, used | {cond})
        right = grow(depth + 1, used | {cond})
        return TreeNode(sample_count=0, majority_class=None, purity=None,
                        condition=cond, left=left, right=right)

    return Tree(grow(0, frozenset()), np.empty(0, np.int64), np.empty(0, np.int64))


def margin_document(path, seed, trees, classes, feature_count=6, base=0.5):
    rng = np.random.default_rng(seed)
    forest = [random_margin_tree(rng, feature_count, max_depth=3)
              for _ in range(trees)]
    tree_classes = None
    if classes > 2:
        tree_classes = [i % classes for i in range(trees)]
    ensemble = Ensemble(trees=forest, aggregation=MARGIN_SUM,
                        class_count=classes, feature_count=feature_count,
                        base_score=base, tree_classes=tree_classes)
    save_ensemble(ensemble, path)
    print(f"wrote {path}")


def main():
    DATA.mkdir(exist_ok=True)
    FIXTURES.mkdir(exist_ok=True)
    for spec in list(DESK_SPECS.values()) + list(SMALL_SPECS.values()):
        dataset = make_synthetic(spec)
        out = DATA / f"{spec.name}.csv"
        save_dataset(dataset, out)
        print(f"wrote {out} ({dataset.instance_count} x {dataset.feature_count}, "
              f"{dataset.class_count} classes)")
    margin_document(FIXTURES / "margin_binary.json", seed=31, trees=12, classes=2)
    margin_document(FIXTURES / "margin_multiclass.json", seed=32, trees=18, classes=3)


if __name__ == "__main__":
    main()
