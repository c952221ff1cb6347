"""Behavioral ternary-CAM simulation.

Queries are packed per layout, matched against stored rows (don't-care cells
match anything), matched paths are recovered per retrieval mode, and leaf
payloads aggregated with the ensemble's rule. Two engines share one semantics:

  * match_block / iter_blocks materialize S x S blocks and compare them cell
    by cell (the reference engine, used on small models and in tests);
  * a sparse row engine folds the per-block comparison into one pass over the
    stored (non-X) cells per unit, which is what cam_predict uses.

A row matches exactly when every stored cell in it matches the query, so both
engines return identical masks; the equivalence is asserted in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import sparse

from .ensemble import Ensemble, MAJORITY_VOTE
from .errors import DataError
from .mapping import (Layout, LayoutUnit, RETRIEVAL_FIXED_ROW,
                      RETRIEVAL_PER_UNIT, RETRIEVAL_STRIP, STRATEGY_ODR)
from .pathspace import (PathSet, encode_features_batch,
                        estimate_condition_checks)
from .validation import as_feature_matrix

X_STATE = -1  # don't-care cell value in materialized blocks


@dataclass
class TernaryBlock:
    """One S x S block: cells in {0, 1, -1=X}; rows beyond the stored paths
    are invalid (all X) and never reported as matches."""

    cells: np.ndarray
    valid_rows: np.ndarray
    occupied_cols: int

    @property
    def size(self) -> int:
        return self.cells.shape[0]


def match_block(block: TernaryBlock, query: np.ndarray) -> np.ndarray:
    """Row match mask: a row matches iff every non-X cell equals the query bit
    in its column."""
    query = np.asarray(query, dtype=np.int8).ravel()
    if query.size != block.occupied_cols:
        raise DataError(
            f"query width {query.size} != occupied columns {block.occupied_cols}")
    sub = block.cells[:, :query.size]
    hits = ((sub == X_STATE) | (sub == query[None, :])).all(axis=1)
    # columns beyond the query are unoccupied and must be all X
    return hits & block.valid_rows


@dataclass
class QueryPlan:
    """Per-unit query bit vectors aligned with each unit's column order.
    Unified/ODR layouts have a single unit whose query is shared by every
    block column strip; FR strips and per-tree/cluster units each get their
    own vector. Batch plans stack queries as (n, width) arrays."""

    retrieval_mode: str
    queries: list[np.ndarray]
    batch: bool = False
    count: int = 1


@dataclass
class MatchResult:
    """Matched rows of one query: global path ids plus per-tree leaf payloads."""

    matched_path_ids: np.ndarray
    leaves_by_tree: dict[int, list[Union[int, float]]]


@dataclass
class CostReport:
    query_bits_total: int
    shared_query_bits: int
    condition_checks: float
    retrieval_ops: int
    tcam_count: int


def pack_queries(layout: Layout, truth: np.ndarray) -> QueryPlan:
    """Slice a truth assignment into per-unit query vectors.

    truth holds one bit per unique condition (global condition-id order), as
    produced by encode_features; batch input of shape (n, U) is accepted.
    """
    truth = np.asarray(truth)
    u = layout.path_set.index.unique_condition_count
    if truth.shape[-1] != u:
        raise DataError(
            f"missing condition in truth: got width {truth.shape[-1]}, "
            f"layout indexes {u} conditions")
    queries = [truth[..., unit.column_ids] for unit in layout.units]
    batch = truth.ndim == 2
    return QueryPlan(retrieval_mode=layout.retrieval_mode, queries=queries,
                     batch=batch, count=truth.shape[0] if batch else 1)


class _UnitMatcher:
    """Sparse row matcher for one unit: a row matches iff all its stored cells
    match, checked as (signed cells) . (signed query) == cells per row."""

    def __init__(self, path_set: PathSet, unit: LayoutUnit):
        local_col = {int(c): j for j, c in enumerate(unit.column_ids)}
        rows, cols, data = [], [], []
        nnz_per_row = np.zeros(unit.height, dtype=np.int64)
        for r, pid in enumerate(unit.row_path_ids.tolist()):
            ids = path_set.cond_ids(pid)
            bits = path_set.bits(pid)
            for cid, bit in zip(ids.tolist(), bits.tolist()):
                j = local_col.get(cid)
                if j is None:
                    continue  # FR strip: cell lives in another strip
                rows.append(r)
                cols.append(j)
                data.append(1 if bit else -1)
                nnz_per_row[r] += 1
        self.matrix = sparse.csr_matrix(
            (np.asarray(data, dtype=np.int64),
             (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
            shape=(unit.height, max(unit.width, 1)))
        self.nnz_per_row = nnz_per_row

    def match(self, query: np.ndarray) -> np.ndarray:
        """Mask of matching unit rows; query may be (w,) or (n, w)."""
        q = np.asarray(query, dtype=np.int64)
        signed = 2 * q - 1
        if signed.ndim == 1:
            pad = signed if signed.size else np.zeros(1, dtype=np.int64)
            agreement = self.matrix @ pad
            return agreement == self.nnz_per_row
        if signed.shape[1] == 0:
            signed = np.zeros((signed.shape[0], 1), dtype=np.int64)
        agreement = self.matrix @ signed.T  # (rows, n)
        return agreement == self.nnz_per_row[:, None]


class _LayoutSimulator:
    def __init__(self, layout: Layout):
        self.layout = layout
        self.matchers = [_UnitMatcher(layout.path_set, u) for u in layout.units]
        ps = layout.path_set
        p = ps.path_count
        self.tree_of = ps.tree_of()
        # strip retrieval: how many strips store cells of each path
        if layout.retrieval_mode == RETRIEVAL_STRIP:
            self.strips_per_path = np.zeros(p, dtype=np.int64)
            for unit in layout.units:
                self.strips_per_path[unit.row_path_ids] += 1

    def match_paths(self, plan: QueryPlan) -> np.ndarray:
        """Path-level match mask(s): (P,) for one query, (n, P) for a batch."""
        layout = self.layout
        p = layout.path_set.path_count
        batch = plan.batch
        n = plan.count
        if layout.retrieval_mode in (RETRIEVAL_FIXED_ROW, RETRIEVAL_PER_UNIT):
            matched = np.zeros((n, p), dtype=bool)
            for unit, matcher, query in zip(layout.units, self.matchers,
                                            plan.queries):
                mask = matcher.match(query)  # (rows,) or (rows, n)
                if mask.ndim == 1:
                    mask = mask[:, None]
                matched[:, unit.row_path_ids] = mask.T
            if not layout.units and p:
                matched[:] = True  # all paths condition-free
        else:
            counts = np.zeros((n, p), dtype=np.int64)
            for unit, matcher, query in zip(layout.units, self.matchers,
                                            plan.queries):
                mask = matcher.match(query)
                if mask.ndim == 1:
                    mask = mask[:, None]
                counts[:, unit.row_path_ids] += mask.T
            # matched in every strip that stores a cell of the path;
            # zero-condition paths sit in no strip and always match
            matched = counts >= self.strips_per_path[None, :]
        return matched if batch else matched[0]


def _simulator(layout: Layout) -> _LayoutSimulator:
    if layout._sim is None:
        layout._sim = _LayoutSimulator(layout)
    return layout._sim


def match_layout(layout: Layout, plan: QueryPlan) -> np.ndarray:
    """Path-level match mask for a packed query (batch-aware)."""
    return _simulator(layout).match_paths(plan)


def retrieve(layout: Layout, matched: np.ndarray) -> MatchResult:
    """Resolve a single query's path-level match mask into path ids and
    per-tree leaf payloads (path_id order, so aggregation is deterministic)."""
    if matched.ndim != 1:
        raise DataError("retrieve expects a single query's match mask")
    ps = layout.path_set
    ids = np.nonzero(matched)[0]
    leaves: dict[int, list] = {}
    for pid in ids.tolist():
        path = ps.paths[pid]
        leaves.setdefault(path.tree_id, []).append(path.leaf)
    return MatchResult(matched_path_ids=ids, leaves_by_tree=leaves)


def _aggregate(layout: Layout, ensemble: Ensemble, matched: np.ndarray) -> np.ndarray:
    ps = layout.path_set
    n = matched.shape[0]
    if ensemble.aggregation == MAJORITY_VOTE:
        onehot = np.zeros((ps.path_count, ensemble.class_count), dtype=np.int64)
        for pid, path in enumerate(ps.paths):
            onehot[pid, int(path.leaf)] = 1
        votes = matched.astype(np.int64) @ onehot
        return np.argmax(votes, axis=1)
    values = np.asarray([float(p.leaf) for p in ps.paths], dtype=np.float64)
    if ensemble.tree_classes is None:
        return ensemble.base_score + matched.astype(np.float64) @ values
    weights = np.zeros((ps.path_count, ensemble.class_count), dtype=np.float64)
    for pid, path in enumerate(ps.paths):
        weights[pid, ensemble.tree_classes[path.tree_id]] = values[pid]
    return ensemble.base_score + matched.astype(np.float64) @ weights


def cam_predict(layout: Layout, ensemble: Ensemble, X):
    """End-to-end CAM inference: encode, pack, match, retrieve, aggregate.

    Accepts one instance or a batch; output shape and semantics follow
    ensemble.predict / predict_batch and must agree with reference traversal.
    """
    arr = np.asarray(X, dtype=np.float64)
    single = arr.ndim == 1
    batch = as_feature_matrix(arr)
    if batch.shape[1] != ensemble.feature_count:
        raise DataError(
            f"instances have {batch.shape[1]} features, expected "
            f"{ensemble.feature_count}")
    truth = encode_features_batch(batch, layout.path_set.index)
    plan = pack_queries(layout, truth)
    matched = match_layout(layout, plan)
    out = _aggregate(layout, ensemble, matched)
    if single:
        out = out[0]
        if ensemble.aggregation == MAJORITY_VOTE:
            return int(out)
        return out if isinstance(out, np.ndarray) else float(out)
    return out


def matches_per_tree(layout: Layout, matched: np.ndarray) -> np.ndarray:
    """Count matched paths per tree: (n, T) for batch masks, (T,) for one.
    Well-formed instances must hit exactly one path per tree."""
    ps = layout.path_set
    tree_count = ps.tree_count
    single = matched.ndim == 1
    masks = matched[None, :] if single else matched
    counts = np.zeros((masks.shape[0], tree_count), dtype=np.int64)
    tree_of = ps.tree_of()
    for t in range(tree_count):
        counts[:, t] = masks[:, tree_of == t].sum(axis=1)
    return counts[0] if single else counts


def cost_report(layout: Layout, path_set: Optional[PathSet] = None) -> CostReport:
    """Pre-processing and retrieval cost counters for a layout.

    Fixed-row and strip layouts share one input sequence across blocks in the
    same column, so their distinct query bits equal the unique condition
    count; per-unit layouts need one sequence per unit. Only strip retrieval
    pays result-intersection work, proportional to its block count.
    """
    ps = path_set if path_set is not None else layout.path_set
    u = ps.index.unique_condition_count
    if layout.retrieval_mode == RETRIEVAL_PER_UNIT:
        query_bits = int(sum(unit.width for unit in layout.units))
        shared = 0
    else:
        query_bits = u
        shared = u
    retrieval_ops = layout.total_tcams if layout.retrieval_mode == RETRIEVAL_STRIP else 0
    feature_count = max(ps.index.feature_count, 1)
    checks = estimate_condition_checks(feature_count, u) if u else float(feature_count)
    return CostReport(query_bits_total=query_bits, shared_query_bits=shared,
                      condition_checks=checks, retrieval_ops=retrieval_ops,
                      tcam_count=layout.total_tcams)


# --- reference block-level engine -----------------------------------------

def iter_blocks(layout: Layout, include_deleted: bool = False):
    """Yield (unit_index, row_block, col_block, TernaryBlock) for every block.

    ODR grid positions whose block was deleted are skipped unless
    include_deleted is set (used to show deletion soundness).
    """
    s = layout.tcam_size
    deleted = set()
    if layout.deleted_blocks is not None:
        deleted = {(int(r), int(c)) for r, c in layout.deleted_blocks}
    for ui, unit in enumerate(layout.units):
        if unit.height == 0 or unit.width == 0:
            continue  # no physical blocks; any such rows match by default
        row_blocks = -(-unit.height // s)
        col_blocks = -(-unit.width // s)
        for rb in range(row_blocks):
            rows = unit.row_path_ids[rb * s:(rb + 1) * s]
            for cb in range(col_blocks):
                if layout.strategy == STRATEGY_ODR and not include_deleted \
                        and (rb, cb) in deleted:
                    continue
                cols = unit.column_ids[cb * s:(cb + 1) * s]
                yield ui, rb, cb, _materialize_block(layout, rows, cols, s)


def _materialize_block(layout: Layout, row_path_ids, column_ids, s) -> TernaryBlock:
    ps = layout.path_set
    cells = np.full((s, s), X_STATE, dtype=np.int8)
    valid = np.zeros(s, dtype=bool)
    local = {int(c): j for j, c in enumerate(column_ids.tolist())}
    for r, pid in enumerate(row_path_ids.tolist()):
        valid[r] = True
        ids = ps.cond_ids(pid)
        bits = ps.bits(pid)
        for cid, bit in zip(ids.tolist(), bits.tolist()):
            j = local.get(int(cid))
            if j is not None:
                cells[r, j] = bit
    return TernaryBlock(cells=cells, valid_rows=valid,
                        occupied_cols=len(column_ids))


def match_paths_blockwise(layout: Layout, plan: QueryPlan,
                          include_deleted: bool = False) -> np.ndarray:
    """Path-level match mask computed block by block with match_block.

    Reference engine: a path matches when every one of its blocks matches its
    row (deleted ODR blocks count as matches); strip retrieval intersects the
    per-strip compacted tables. Single-query plans only.
    """
    ps = layout.path_set
    p = ps.path_count
    strip_mode = layout.retrieval_mode == RETRIEVAL_STRIP
    counts = np.zeros(p, dtype=np.int64)
    matched = np.ones(p, dtype=bool)  # rows stored in no block always match
    strip_hit: dict[tuple[int, int], np.ndarray] = {}
    s = layout.tcam_size
    for ui, rb, cb, block in iter_blocks(layout, include_deleted=include_deleted):
        query = np.asarray(plan.queries[ui])[cb * s:(cb + 1) * s]
        hits = match_block(block, query)
        strip_hit.setdefault((ui, rb), np.ones(block.size, dtype=bool))
        strip_hit[(ui, rb)] &= hits
    for (ui, rb), hits in strip_hit.items():
        rows = layout.units[ui].row_path_ids[rb * s:(rb + 1) * s]
        if strip_mode:
            counts[rows] += hits[:rows.size]
        else:
            matched[rows] &= hits[:rows.size]
    if strip_mode:
        return counts >= _simulator(layout).strips_per_path
    return matched