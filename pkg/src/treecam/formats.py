"""File formats: dataset CSV, the ensemble interchange document, layout
exports, and report writers. Schemas are documented in docs/formats.md.

Thresholds and leaf values are serialized as decimal strings (shortest
round-trip repr) so documents reload bit-exactly.
"""

from __future__ import annotations

import csv
import json
import math
import os
import numpy as np

from .ensemble import (AGGREGATIONS, Condition, Dataset, Ensemble,
                       TrainingParams, Tree, TreeNode,
                       _raise_recursion_limit)
from .errors import DataError
from .mapping import Layout

DOCUMENT_VERSION = 1


# --- dataset CSV ------------------------------------------------------------

def load_dataset(path, class_weights=None) -> Dataset:
    """CSV with a header row; the last column is the label. String labels are
    mapped to class ids in order of first appearance."""
    rows = []
    labels = []
    label_ids: dict[str, int] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if len(header) < 2:
            raise DataError(f"{path}: need at least one feature column and a label")
        width = len(header)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise DataError(
                    f"{path}:{lineno}: expected {width} fields, got {len(row)}")
            try:
                values = [float(v) for v in row[:-1]]
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            if not all(math.isfinite(v) for v in values):
                raise DataError(f"{path}:{lineno}: non-finite feature value")
            label = row[-1]
            if label not in label_ids:
                label_ids[label] = len(label_ids)
            rows.append(values)
            labels.append(label_ids[label])
    if not rows:
        raise DataError(f"{path}: no data rows")
    names = list(label_ids)
    return Dataset.from_arrays(np.asarray(rows), np.asarray(labels),
                               class_count=len(names),
                               class_weights=class_weights, label_names=names)


def save_dataset(dataset: Dataset, path):
    """Inverse of load_dataset (used by the fixture generator)."""
    names = dataset.label_names or [str(c) for c in range(dataset.class_count)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{i}" for i in range(dataset.feature_count)] + ["label"])
        for row, label in zip(dataset.feature_matrix, dataset.labels):
            writer.writerow([repr(float(v)) for v in row] + [names[label]])


# --- ensemble interchange document -------------------------------------------

def _node_to_record(node: TreeNode) -> dict:
    record: dict = {}
    if node.majority_class is not None:
        record["majority_class"] = int(node.majority_class)
    if node.purity is not None:
        record["purity"] = float(node.purity)
    if node.sample_count:
        record["sample_count"] = int(node.sample_count)
    if node.is_leaf:
        if node.leaf_value is not None:
            record["leaf_value"] = repr(float(node.leaf_value))
        else:
            record["leaf_class"] = int(node.majority_class)
        return record
    record["feature"] = int(node.condition.feature)
    record["threshold"] = repr(float(node.condition.threshold))
    record["left"] = _node_to_record(node.left)
    record["right"] = _node_to_record(node.right)
    return record


def _record_to_node(record: dict, where: str) -> TreeNode:
    if not isinstance(record, dict):
        raise DataError(f"{where}: node record must be an object")
    majority = record.get("majority_class")
    purity = record.get("purity")
    samples = int(record.get("sample_count", 0))
    if "feature" in record:
        for key in ("threshold", "left", "right"):
            if key not in record:
                raise DataError(f"{where}: internal node missing {key!r}")
        cond = Condition(int(record["feature"]), _parse_real(record["threshold"], where))
        left = _record_to_node(record["left"], where + ".left")
        right = _record_to_node(record["right"], where + ".right")
        return TreeNode(sample_count=samples, majority_class=majority,
                        purity=purity, condition=cond, left=left, right=right)
    if "leaf_value" in record:
        return TreeNode(sample_count=samples, majority_class=majority,
                        purity=purity, leaf_value=_parse_real(record["leaf_value"], where))
    if "leaf_class" in record:
        cls = int(record["leaf_class"])
        return TreeNode(sample_count=samples, majority_class=cls,
                        purity=purity)
    raise DataError(f"{where}: node is neither internal nor leaf")


def _parse_real(value, where: str) -> float:
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise DataError(f"{where}: not a number: {value!r}") from None
    if not math.isfinite(out):
        raise DataError(f"{where}: non-finite value")
    return out


def ensemble_to_document(ensemble: Ensemble) -> dict:
    _raise_recursion_limit()
    doc: dict = {
        "format_version": DOCUMENT_VERSION,
        "aggregation": ensemble.aggregation,
        "class_count": ensemble.class_count,
        "feature_count": ensemble.feature_count,
        "base_score": repr(float(ensemble.base_score)),
        "trees": [],
    }
    if ensemble.tree_classes is not None:
        doc["tree_classes"] = [int(c) for c in ensemble.tree_classes]
    if ensemble.training_params is not None:
        p = ensemble.training_params
        doc["training_params"] = {
            "num_trees": p.num_trees, "seed": p.seed, "mtry": p.mtry,
            "min_samples_leaf": p.min_samples_leaf, "max_depth": p.max_depth,
        }
    for tree in ensemble.trees:
        entry = {"root": _node_to_record(tree.root)}
        if tree.oob.size or tree.in_bag.size:
            entry["in_bag"] = tree.in_bag.tolist()
            entry["oob"] = tree.oob.tolist()
        doc["trees"].append(entry)
    return doc


def document_to_ensemble(doc: dict, where: str = "document") -> Ensemble:
    _raise_recursion_limit()
    if not isinstance(doc, dict):
        raise DataError(f"{where}: must be a JSON object")
    version = doc.get("format_version")
    if version != DOCUMENT_VERSION:
        raise DataError(
            f"{where}.format_version: expected {DOCUMENT_VERSION}, got {version!r}")
    aggregation = doc.get("aggregation")
    if aggregation not in AGGREGATIONS:
        raise DataError(f"{where}.aggregation: unknown mode {aggregation!r}")
    try:
        class_count = int(doc["class_count"])
        feature_count = int(doc["feature_count"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{where}: bad or missing class/feature counts ({exc})")
    base_score = _parse_real(doc.get("base_score", 0.0), f"{where}.base_score")
    records = doc.get("trees")
    if not isinstance(records, list) or not records:
        raise DataError(f"{where}.trees: must be a non-empty list")
    trees = []
    for i, entry in enumerate(records):
        node_where = f"{where}.trees[{i}]"
        if not isinstance(entry, dict) or "root" not in entry:
            raise DataError(f"{node_where}: missing root")
        root = _record_to_node(entry["root"], node_where)
        in_bag = np.asarray(entry.get("in_bag", []), dtype=np.int64)
        oob = np.asarray(entry.get("oob", []), dtype=np.int64)
        trees.append(Tree(root, in_bag, oob))
    tree_classes = doc.get("tree_classes")
    if tree_classes is not None:
        tree_classes = [int(c) for c in tree_classes]
        if len(tree_classes) != len(trees):
            raise DataError(f"{where}.tree_classes: length != tree count")
        if any(not 0 <= c < class_count for c in tree_classes):
            raise DataError(f"{where}.tree_classes: class id out of range")
    params = None
    tp = doc.get("training_params")
    if tp:
        params = TrainingParams(
            num_trees=int(tp.get("num_trees", len(trees))),
            seed=tp.get("seed"), mtry=tp.get("mtry"),
            min_samples_leaf=int(tp.get("min_samples_leaf", 1)),
            max_depth=tp.get("max_depth"))
    return Ensemble(trees=trees, aggregation=aggregation,
                    class_count=class_count, feature_count=feature_count,
                    base_score=base_score, tree_classes=tree_classes,
                    training_params=params)


def save_ensemble(ensemble: Ensemble, path):
    with open(path, "w") as fh:
        json.dump(ensemble_to_document(ensemble), fh)
        fh.write("\n")


def load_ensemble(path) -> Ensemble:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON ({exc})") from None
    return document_to_ensemble(doc, where=str(path))


# --- layout export ------------------------------------------------------------

def save_layout(layout: Layout, path):
    """Strategy, block size, per-unit column ids and row tables, and (for the
    double-reordering strategy) the grid shape and deleted block coordinates:
    enough to rebuild simulator state bit-exactly next to the ensemble's
    extracted paths."""
    doc = {
        "format_version": DOCUMENT_VERSION,
        "strategy": layout.strategy,
        "tcam_size": layout.tcam_size,
        "retrieval_mode": layout.retrieval_mode,
        "total_tcams": layout.total_tcams,
        "path_count": layout.path_set.path_count,
        "unique_condition_count": layout.path_set.index.unique_condition_count,
        "units": [
            {"label": u.label,
             "column_ids": u.column_ids.tolist(),
             "row_path_ids": u.row_path_ids.tolist()}
            for u in layout.units
        ],
    }
    if layout.grid_shape is not None:
        doc["grid_shape"] = list(layout.grid_shape)
    if layout.deleted_blocks is not None:
        doc["deleted_blocks"] = layout.deleted_blocks.tolist()
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_layout(path, path_set) -> Layout:
    from .mapping import LayoutUnit  # local import to keep module load light

    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON ({exc})") from None
    if doc.get("format_version") != DOCUMENT_VERSION:
        raise DataError(f"{path}: format_version mismatch")
    if doc.get("path_count") != path_set.path_count or \
            doc.get("unique_condition_count") != path_set.index.unique_condition_count:
        raise DataError(
            f"{path}: layout was built for a different model "
            f"({doc.get('path_count')} paths / {doc.get('unique_condition_count')} "
            f"conditions, model has {path_set.path_count} / "
            f"{path_set.index.unique_condition_count})")
    units = [LayoutUnit(column_ids=np.asarray(u["column_ids"], dtype=np.int64),
                        row_path_ids=np.asarray(u["row_path_ids"], dtype=np.int64),
                        label=u.get("label", ""))
             for u in doc.get("units", [])]
    grid_shape = tuple(doc["grid_shape"]) if "grid_shape" in doc else None
    deleted = None
    if "deleted_blocks" in doc:
        deleted = np.asarray(doc["deleted_blocks"], dtype=np.int64).reshape(-1, 2)
    return Layout(strategy=doc["strategy"], tcam_size=int(doc["tcam_size"]),
                  units=units, retrieval_mode=doc["retrieval_mode"],
                  total_tcams=int(doc["total_tcams"]), path_set=path_set,
                  grid_shape=grid_shape, deleted_blocks=deleted)


# --- report writers -----------------------------------------------------------

REPORT_COLUMNS = [
    "dataset", "model", "tolerance_pct", "threshold", "strategy", "tcam_size",
    "tcam_count", "path_count", "unique_conditions", "avg_path_length",
    "redundancy", "size_mib_nominal", "oob_accuracy", "oob_after",
    "test_accuracy", "query_bits_total", "shared_query_bits",
    "condition_checks", "retrieval_ops", "wall_clock_s", "error",
]


def write_report_csv(rows: list[dict], path):
    extra = sorted({k for row in rows for k in row} - set(REPORT_COLUMNS))
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS + extra)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def write_report_json(rows: list[dict], path):
    with open(path, "w") as fh:
        json.dump({"format_version": DOCUMENT_VERSION, "rows": rows}, fh, indent=1)
        fh.write("\n")


def write_report(rows: list[dict], path):
    """Dispatch on extension: .csv or .json."""
    path = os.fspath(path)
    if path.endswith(".csv"):
        write_report_csv(rows, path)
    elif path.endswith(".json"):
        write_report_json(rows, path)
    else:
        raise DataError(f"{path}: report path must end in .csv or .json")


def load_report(path) -> list[dict]:
    path = os.fspath(path)
    if path.endswith(".json"):
        with open(path) as fh:
            doc = json.load(fh)
        if doc.get("format_version") != DOCUMENT_VERSION:
            raise DataError(f"{path}: format_version mismatch")
        return doc["rows"]
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
