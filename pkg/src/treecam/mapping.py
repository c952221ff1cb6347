"""CAM data placement strategies.

Five ways to assign root-to-leaf paths (rows) and unique conditions (columns)
to fixed-size S x S ternary blocks:

  unified      one matrix for the whole ensemble, global column order
  independent  one matrix per tree, columns restricted to the tree
  fr           frequency-sorted columns cut into strips of width S; rows that
               are all don't-care within a strip are eliminated (baseline)
  odr          frequency-sorted columns, rows ordered so rare-condition paths
               sit on top, then blocks holding only don't-care cells deleted
  spc          greedy clustering of condition-sharing paths, one block per
               cluster

Layouts permute and partition cells; they never alter a path's bits.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DataError
from .pathspace import PathSet

STRATEGY_UNIFIED = "unified"
STRATEGY_INDEPENDENT = "independent"
STRATEGY_FR = "fr"
STRATEGY_ODR = "odr"
STRATEGY_SPC = "spc"

STRATEGIES = (STRATEGY_UNIFIED, STRATEGY_INDEPENDENT, STRATEGY_FR,
              STRATEGY_ODR, STRATEGY_SPC)

RETRIEVAL_FIXED_ROW = "fixed_row"
RETRIEVAL_PER_UNIT = "per_unit_table"
RETRIEVAL_STRIP = "strip_intersection"


@dataclass
class LayoutUnit:
    """One mapping unit: an ordered set of condition columns and path rows.

    A unit spans ceil(cols/S) x ceil(rows/S) blocks, except FR strips (width
    always <= S) and SPC clusters (exactly one block)."""

    column_ids: np.ndarray  # global condition ids, column order
    row_path_ids: np.ndarray  # row -> path_id
    label: str = ""

    @property
    def width(self) -> int:
        return int(self.column_ids.size)

    @property
    def height(self) -> int:
        return int(self.row_path_ids.size)


@dataclass
class Cluster:
    """SPC working set: member paths plus the union of their conditions.
    Both stay within S so the cluster fits a single block."""

    member_path_ids: list[int]
    condition_ids: set[int]


@dataclass
class Layout:
    strategy: str
    tcam_size: int
    units: list[LayoutUnit]
    retrieval_mode: str
    total_tcams: int
    path_set: PathSet
    # odr only: grid shape in blocks and deleted all-X block coordinates
    grid_shape: Optional[tuple[int, int]] = None
    deleted_blocks: Optional[np.ndarray] = None  # (k, 2) of (row_block, col_block)
    _sim: object = field(default=None, repr=False, compare=False)


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def _check_size(s: int):
    if s < 1:
        raise DataError(f"tcam size must be >= 1, got {s}")


def frequency_column_order(path_set: PathSet) -> np.ndarray:
    """Condition ids sorted by descending frequency, ties broken by ascending
    (feature, threshold)."""
    index = path_set.index
    order = sorted(
        range(index.unique_condition_count),
        key=lambda cid: (-int(index.frequencies[cid]),
                         index.conditions[cid].feature,
                         index.conditions[cid].threshold))
    return np.asarray(order, dtype=np.int64)


def map_naive_unified(path_set: PathSet, tcam_size: int) -> Layout:
    """Whole ensemble in one matrix: global column order, path_id row order."""
    _check_size(tcam_size)
    p = path_set.path_count
    u = path_set.index.unique_condition_count
    units = []
    if p:
        units.append(LayoutUnit(column_ids=np.arange(u, dtype=np.int64),
                                row_path_ids=np.arange(p, dtype=np.int64),
                                label="ensemble"))
    total = _ceil_div(u, tcam_size) * _ceil_div(p, tcam_size)
    return Layout(STRATEGY_UNIFIED, tcam_size, units, RETRIEVAL_FIXED_ROW,
                  total, path_set)


def map_naive_independent(path_set: PathSet, tcam_size: int) -> Layout:
    """One matrix per tree, columns restricted to conditions the tree uses."""
    _check_size(tcam_size)
    units = []
    total = 0
    for tree_id, (start, end) in enumerate(path_set.tree_ranges):
        rows = np.arange(start, end, dtype=np.int64)
        cond_ids = set()
        for pid in range(start, end):
            cond_ids.update(path_set.cond_ids(pid).tolist())
        cols = np.asarray(sorted(cond_ids), dtype=np.int64)
        units.append(LayoutUnit(column_ids=cols, row_path_ids=rows,
                                label=f"tree {tree_id}"))
        total += _ceil_div(cols.size, tcam_size) * _ceil_div(rows.size, tcam_size)
    return Layout(STRATEGY_INDEPENDENT, tcam_size, units, RETRIEVAL_PER_UNIT,
                  total, path_set)


def _odr_row_order(path_set: PathSet, column_order: np.ndarray) -> np.ndarray:
    """Row order per the double-reordering rule: walk conditions from rarest
    to most frequent (the reversed column order) and append, in stable path_id
    order, every unplaced path containing the current condition. Paths with no
    conditions go last."""
    by_condition: dict[int, list[int]] = {}
    for pid in range(path_set.path_count):
        for cid in path_set.cond_ids(pid):
            by_condition.setdefault(int(cid), []).append(pid)
    placed = np.zeros(path_set.path_count, dtype=bool)
    rows = []
    for cid in column_order[::-1]:
        for pid in by_condition.get(int(cid), ()):
            if not placed[pid]:
                placed[pid] = True
                rows.append(pid)
    for pid in range(path_set.path_count):
        if not placed[pid]:
            rows.append(pid)
    return np.asarray(rows, dtype=np.int64)


def map_odr(path_set: PathSet, tcam_size: int) -> Layout:
    """Occurrence-based double reordering: sort columns by frequency, stack
    rare-condition paths on top, then delete blocks that hold only don't-care
    cells. Surviving grid positions keep paths in fixed rows."""
    _check_size(tcam_size)
    s = tcam_size
    p = path_set.path_count
    u = path_set.index.unique_condition_count
    if p == 0:
        return Layout(STRATEGY_ODR, s, [], RETRIEVAL_FIXED_ROW, 0, path_set,
                      grid_shape=(0, 0),
                      deleted_blocks=np.empty((0, 2), dtype=np.int64))
    column_order = frequency_column_order(path_set)
    row_order = _odr_row_order(path_set, column_order)

    col_pos = np.empty(u, dtype=np.int64)
    col_pos[column_order] = np.arange(u)
    row_blocks = _ceil_div(p, s)
    col_blocks = _ceil_div(u, s)
    occupied = np.zeros((row_blocks, col_blocks), dtype=bool)
    for row, pid in enumerate(row_order):
        ids = path_set.cond_ids(int(pid))
        if ids.size:
            occupied[row // s, np.unique(col_pos[ids] // s)] = True
    deleted = np.argwhere(~occupied).astype(np.int64)
    total = int(occupied.sum())
    unit = LayoutUnit(column_ids=column_order, row_path_ids=row_order,
                      label="ensemble")
    return Layout(STRATEGY_ODR, s, [unit], RETRIEVAL_FIXED_ROW, total,
                  path_set, grid_shape=(row_blocks, col_blocks),
                  deleted_blocks=deleted)


def map_fr(path_set: PathSet, tcam_size: int) -> Layout:
    """Condition reordering with row elimination: frequency-sorted columns cut
    into strips of width S; within each strip only rows with at least one
    stored cell are kept (stable order). Retrieval must intersect per-strip
    matches, so every strip keeps its own compacted row table."""
    _check_size(tcam_size)
    s = tcam_size
    u = path_set.index.unique_condition_count
    column_order = frequency_column_order(path_set)
    col_pos = np.empty(u, dtype=np.int64)
    col_pos[column_order] = np.arange(u)

    strip_count = _ceil_div(u, s)
    strip_rows: list[list[int]] = [[] for _ in range(strip_count)]
    for pid in range(path_set.path_count):
        ids = path_set.cond_ids(pid)
        if ids.size:
            for strip in np.unique(col_pos[ids] // s):
                strip_rows[strip].append(pid)

    units = []
    total = 0
    for strip in range(strip_count):
        cols = column_order[strip * s:(strip + 1) * s]
        rows = np.asarray(sorted(strip_rows[strip]), dtype=np.int64)
        units.append(LayoutUnit(column_ids=cols, row_path_ids=rows,
                                label=f"strip {strip}"))
        total += _ceil_div(rows.size, s)
    return Layout(STRATEGY_FR, s, units, RETRIEVAL_STRIP, total, path_set)


def spc_clusters(path_set: PathSet, tcam_size: int) -> list[Cluster]:
    """Greedy similarity clustering.

    While unplaced paths remain, pick the path that fits the open cluster
    (member count < S and condition union stays within S) with (1) the most
    conditions shared with the cluster union, (2) the smallest resulting
    union, (3) the lowest path_id. An empty cluster therefore seeds with the
    fewest-conditions path. When nothing fits or the cluster is full it is
    closed and a new one opened.
    """
    _check_size(tcam_size)
    s = tcam_size
    p = path_set.path_count
    if p == 0:
        return []
    lengths = np.asarray([path.length for path in path_set.paths], dtype=np.int64)
    if lengths.max(initial=0) > s:
        raise DataError(
            f"TCAM too small for path: longest path has {int(lengths.max())} "
            f"conditions, block size is {s}")

    by_condition: dict[int, np.ndarray] = {}
    members_of: dict[int, list[int]] = {}
    for pid in range(p):
        for cid in path_set.cond_ids(pid):
            members_of.setdefault(int(cid), []).append(pid)
    for cid, pids in members_of.items():
        by_condition[cid] = np.asarray(pids, dtype=np.int64)

    # One argmax per placement over a composite score
    #   score = shared_conditions * unit - union_growth,  unit = s + 2
    # so the share count dominates and growth breaks ties; argmax returns the
    # first maximum, giving the lowest-path_id tie-break for free. Placed
    # paths get a huge growth so the fit mask rejects them, and a sentinel
    # score below any real one.
    unit = np.int64(s + 2)
    dead_growth = np.int64(1) << 40
    dead_score = -(np.int64(1) << 62)
    alive = np.ones(p, dtype=bool)
    growth = lengths.copy()
    score = -growth

    clusters: list[Cluster] = []
    current = Cluster([], set())
    remaining = p
    while remaining:
        if len(current.member_path_ids) < s:
            avail = s - len(current.condition_ids)
            masked = np.where(growth <= avail, score, dead_score)
            best = int(np.argmax(masked))
            fits = bool(growth[best] <= avail)
        else:
            fits = False
        if not fits:
            clusters.append(current)
            current = Cluster([], set())
            growth = np.where(alive, lengths, dead_growth)
            score = np.where(alive, -growth, dead_score)
            continue
        current.member_path_ids.append(best)
        new_conditions = [int(c) for c in path_set.cond_ids(best)
                          if int(c) not in current.condition_ids]
        current.condition_ids.update(new_conditions)
        alive[best] = False
        growth[best] = dead_growth
        score[best] = dead_score
        remaining -= 1
        for cid in new_conditions:
            pids = by_condition[cid]
            growth[pids] -= 1
            score[pids] += unit + 1
    if current.member_path_ids:
        clusters.append(current)
    return clusters


def map_spc(path_set: PathSet, tcam_size: int) -> Layout:
    """Similarity-based path clustering; one block per cluster."""
    clusters = spc_clusters(path_set, tcam_size)
    units = []
    for i, cluster in enumerate(clusters):
        cols = np.asarray(sorted(cluster.condition_ids), dtype=np.int64)
        rows = np.asarray(cluster.member_path_ids, dtype=np.int64)
        units.append(LayoutUnit(column_ids=cols, row_path_ids=rows,
                                label=f"cluster {i}"))
    return Layout(STRATEGY_SPC, tcam_size, units, RETRIEVAL_PER_UNIT,
                  len(clusters), path_set)


_STRATEGY_FUNCS = {
    STRATEGY_UNIFIED: map_naive_unified,
    STRATEGY_INDEPENDENT: map_naive_independent,
    STRATEGY_FR: map_fr,
    STRATEGY_ODR: map_odr,
    STRATEGY_SPC: map_spc,
}


def map_paths(path_set: PathSet, strategy: str, tcam_size: int) -> Layout:
    try:
        func = _STRATEGY_FUNCS[strategy]
    except KeyError:
        raise DataError(f"unknown strategy: {strategy!r}") from None
    return func(path_set, tcam_size)


def tcam_count(layout: Layout) -> int:
    """Number of S x S blocks the layout occupies."""
    return layout.total_tcams


def unit_block_count(layout: Layout, unit: LayoutUnit) -> int:
    s = layout.tcam_size
    if layout.strategy == STRATEGY_SPC:
        return 1
    return _ceil_div(unit.width, s) * _ceil_div(unit.height, s)


def unit_cells(layout: Layout, unit: LayoutUnit):
    """Yield (path_id, condition_id, bit) for every cell stored in a unit.

    For row-per-path units this is every cell of each row's path; for FR
    strips it is the path's cells restricted to the strip columns.
    """
    ps = layout.path_set
    columns = set(unit.column_ids.tolist())
    for pid in unit.row_path_ids.tolist():
        ids = ps.cond_ids(pid)
        bits = ps.bits(pid)
        for cid, bit in zip(ids.tolist(), bits.tolist()):
            if cid in columns:
                yield pid, cid, int(bit)
            elif layout.retrieval_mode != RETRIEVAL_STRIP:
                raise DataError(
                    f"path {pid} stores condition {cid} outside unit columns")
