"""Root-to-leaf path extraction, the global condition index, and the
redundancy/size/cost metrics of the naive row-per-path CAM layout."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .ensemble import Condition, Ensemble, _raise_recursion_limit
from .errors import DataError
from .validation import as_feature_matrix, check_instance

MIB = 1024.0 * 1024.0


@dataclass
class ConditionIndex:
    """Unique conditions in first-appearance order with per-path frequencies
    and per-feature sorted threshold tables for encoding."""

    conditions: list[Condition]
    frequencies: np.ndarray
    id_of: dict[Condition, int]
    # feature -> (ascending thresholds, condition ids aligned with them)
    feature_tables: dict[int, tuple[np.ndarray, np.ndarray]]

    @property
    def unique_condition_count(self) -> int:
        return len(self.conditions)

    @property
    def feature_count(self) -> int:
        """Number of features that appear in at least one condition."""
        return len(self.feature_tables)


@dataclass
class Path:
    """One root-to-leaf traversal: sparse condition -> bit map (1 = condition
    holds on this path) plus the leaf payload (class id or margin value)."""

    path_id: int
    tree_id: int
    cells: dict[Condition, int]
    leaf: Union[int, float]

    @property
    def length(self) -> int:
        return len(self.cells)


@dataclass
class PathSet:
    paths: list[Path]
    index: ConditionIndex
    tree_ranges: list[tuple[int, int]]  # per tree: [start, end) into paths
    _cond_ids: Optional[list[np.ndarray]] = field(default=None, repr=False)
    _bits: Optional[list[np.ndarray]] = field(default=None, repr=False)

    @property
    def path_count(self) -> int:
        return len(self.paths)

    @property
    def tree_count(self) -> int:
        return len(self.tree_ranges)

    @property
    def total_cells(self) -> int:
        return sum(p.length for p in self.paths)

    @property
    def avg_path_length(self) -> float:
        return self.total_cells / self.path_count if self.paths else 0.0

    @property
    def max_path_length(self) -> int:
        return max((p.length for p in self.paths), default=0)

    def cond_ids(self, path_id: int) -> np.ndarray:
        """Condition ids of one path, aligned with bits()."""
        self._materialize()
        return self._cond_ids[path_id]

    def bits(self, path_id: int) -> np.ndarray:
        self._materialize()
        return self._bits[path_id]

    def tree_of(self) -> np.ndarray:
        return np.asarray([p.tree_id for p in self.paths], dtype=np.int64)

    def _materialize(self):
        if self._cond_ids is None:
            ids = []
            bits = []
            id_of = self.index.id_of
            for p in self.paths:
                ids.append(np.asarray([id_of[c] for c in p.cells], dtype=np.int64))
                bits.append(np.asarray(list(p.cells.values()), dtype=np.uint8))
            self._cond_ids = ids
            self._bits = bits


def extract_paths(ensemble: Ensemble) -> PathSet:
    """Enumerate every root-to-leaf path depth-first, left branch first.

    Duplicate occurrences of a condition with the same outcome are merged;
    a contradictory duplicate makes the path unreachable and it is dropped
    with a warning.
    """
    conditions: list[Condition] = []
    id_of: dict[Condition, int] = {}
    paths: list[Path] = []
    tree_ranges: list[tuple[int, int]] = []
    dropped = 0

    def register(cond: Condition):
        if cond not in id_of:
            id_of[cond] = len(conditions)
            conditions.append(cond)

    _raise_recursion_limit()
    for tree_id, tree in enumerate(ensemble.trees):
        start = len(paths)
        cells: dict[Condition, int] = {}

        def walk(node, contradicted):
            nonlocal dropped
            if node.is_leaf:
                if contradicted:
                    dropped += 1
                    return
                for cond in cells:
                    register(cond)
                paths.append(Path(path_id=len(paths), tree_id=tree_id,
                                  cells=dict(cells), leaf=node.prediction))
                return
            cond = node.condition
            prev = cells.get(cond)
            for child, bit in ((node.left, 1), (node.right, 0)):
                if prev is None:
                    cells[cond] = bit
                    walk(child, contradicted)
                    del cells[cond]
                elif prev == bit:
                    walk(child, contradicted)
                else:
                    walk(child, True)

        walk(tree.root, False)
        tree_ranges.append((start, len(paths)))

    if dropped:
        warnings.warn(f"dropped {dropped} unreachable path(s) with "
                      "contradictory condition outcomes")

    frequencies = np.zeros(len(conditions), dtype=np.int64)
    for p in paths:
        for cond in p.cells:
            frequencies[id_of[cond]] += 1
    feature_tables = _build_feature_tables(conditions)
    index = ConditionIndex(conditions, frequencies, id_of, feature_tables)
    return PathSet(paths=paths, index=index, tree_ranges=tree_ranges)


def _build_feature_tables(conditions):
    by_feature: dict[int, list[tuple[float, int]]] = {}
    for cid, cond in enumerate(conditions):
        by_feature.setdefault(cond.feature, []).append((cond.threshold, cid))
    tables = {}
    for f in sorted(by_feature):
        pairs = sorted(by_feature[f])
        thresholds = np.asarray([t for t, _ in pairs], dtype=np.float64)
        ids = np.asarray([c for _, c in pairs], dtype=np.int64)
        tables[f] = (thresholds, ids)
    return tables


def redundancy_from_counts(avg_path_length: float, unique_condition_count: int) -> float:
    """Fraction of don't-care cells in the naive unified matrix."""
    if unique_condition_count < 1:
        return 0.0
    return 1.0 - avg_path_length / unique_condition_count


def redundancy(path_set: PathSet) -> float:
    return redundancy_from_counts(path_set.avg_path_length,
                                  path_set.index.unique_condition_count)


def layout_size_bytes(path_count: int, unique_condition_count: int) -> float:
    """Nominal naive-layout size at one bit per ternary cell, in bytes."""
    if path_count < 0 or unique_condition_count < 0:
        raise DataError("counts must be non-negative")
    return path_count * unique_condition_count / 8.0


def layout_size_mib(path_count: int, unique_condition_count: int) -> float:
    return layout_size_bytes(path_count, unique_condition_count) / MIB


def physical_size_bytes(path_count: int, unique_condition_count: int) -> float:
    """Size at two bits per ternary cell (a physical cell stores three states)."""
    return path_count * unique_condition_count / 4.0


def encode_features(instance, index: ConditionIndex,
                    feature_count: Optional[int] = None) -> np.ndarray:
    """Truth assignment over all unique conditions for one instance.

    One binary search per feature locates the value among the sorted
    thresholds; every condition with threshold >= value is true under the
    "<=" convention.
    """
    if feature_count is not None:
        instance = check_instance(instance, feature_count)
    else:
        instance = np.asarray(instance, dtype=np.float64).ravel()
        if not np.isfinite(instance).all():
            raise DataError("non-finite feature value in instance")
    bits = np.zeros(index.unique_condition_count, dtype=np.uint8)
    for f, (thresholds, ids) in index.feature_tables.items():
        pos = int(np.searchsorted(thresholds, instance[f], side="left"))
        bits[ids[pos:]] = 1
    return bits


def encode_features_batch(X, index: ConditionIndex) -> np.ndarray:
    """(n, unique_condition_count) truth assignments for many instances."""
    X = as_feature_matrix(X)
    n = X.shape[0]
    bits = np.zeros((n, index.unique_condition_count), dtype=np.uint8)
    for f, (thresholds, ids) in index.feature_tables.items():
        pos = np.searchsorted(thresholds, X[:, f], side="left")
        # condition ids at table positions >= pos[i] are true for row i
        width = thresholds.size
        mask = np.arange(width)[None, :] >= pos[:, None]
        bits[:, ids] = mask
    return bits


def consistent_paths(path_set: PathSet, truth: np.ndarray) -> list[int]:
    """Path ids whose every stored cell agrees with the truth assignment.

    Semantics oracle: for a full forest exactly one path per tree matches.
    """
    out = []
    for p in path_set.paths:
        ids = path_set.cond_ids(p.path_id)
        if np.array_equal(truth[ids], path_set.bits(p.path_id)):
            out.append(p.path_id)
    return out


def estimate_condition_checks(feature_count: int, unique_condition_count: int) -> float:
    """Binary-search estimate F * log2(U / F), floored at one check per feature."""
    if feature_count < 1:
        raise DataError("feature_count must be >= 1")
    if unique_condition_count < feature_count:
        return float(feature_count)
    value = feature_count * math.log2(unique_condition_count / feature_count)
    return max(value, float(feature_count))
