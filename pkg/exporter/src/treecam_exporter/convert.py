"""Convert externally trained tree models into the treecam interchange
document (docs/formats.md in the primary repository). Only the document
format couples this tool to the pipeline; nothing here imports treecam.

Supported sources:

  * sklearn RandomForestClassifier  -> majority_vote document with per-node
    majority/purity annotations and per-tree OOB indices (prunable)
  * sklearn GradientBoostingClassifier -> margin_sum document; multi-class
    priors become one constant intercept tree per class
  * XGBoost-style JSON dump (list of tree objects) -> margin_sum document

The target convention is "value <= threshold goes left". sklearn already
splits that way; XGBoost dumps split on "value < threshold", which converts
exactly to "<= threshold'" with threshold' the largest double below the
stored threshold.
"""

from __future__ import annotations

import json
import math

import numpy as np

DOCUMENT_VERSION = 1


class ExportError(Exception):
    pass


def _real(x) -> str:
    return repr(float(x))


# --- sklearn decision trees ---------------------------------------------------

def _sklearn_node(tree, node, leaf_value_of=None):
    """Recursive node record from a fitted sklearn tree_ structure.

    leaf_value_of(node) -> float turns the tree into a margin tree; without
    it leaves carry their majority class and every node its class annotation.
    """
    left = tree.children_left[node]
    right = tree.children_right[node]
    record = {}
    if leaf_value_of is None:
        counts = tree.value[node][0]
        total = counts.sum()
        majority = int(np.argmax(counts))
        record["majority_class"] = majority
        record["purity"] = float(counts[majority] / total) if total else 1.0
        record["sample_count"] = int(tree.n_node_samples[node])
    if left == -1:
        if leaf_value_of is None:
            record["leaf_class"] = record["majority_class"]
        else:
            record["leaf_value"] = _real(leaf_value_of(node))
        return record
    record["feature"] = int(tree.feature[node])
    record["threshold"] = _real(tree.threshold[node])
    record["left"] = _sklearn_node(tree, left, leaf_value_of)
    record["right"] = _sklearn_node(tree, right, leaf_value_of)
    return record


def export_random_forest(model) -> dict:
    """sklearn RandomForestClassifier -> annotated majority_vote document."""
    _require_fitted(model, "estimators_")
    if getattr(model, "n_outputs_", 1) != 1:
        raise ExportError("multi-output forests are not supported")
    trees = []
    sample_sets = None
    if getattr(model, "bootstrap", False):
        try:
            sample_sets = model.estimators_samples_
        except Exception:
            sample_sets = None
    for i, est in enumerate(model.estimators_):
        entry = {"root": _sklearn_node(est.tree_, 0)}
        if sample_sets is not None:
            # one bootstrap draw per training row, so the draw list length is
            # the original dataset size
            in_bag = np.asarray(sample_sets[i], dtype=np.int64)
            oob = np.setdiff1d(np.arange(in_bag.size), in_bag)
            entry["in_bag"] = in_bag.tolist()
            entry["oob"] = oob.tolist()
        trees.append(entry)
    if not trees:
        raise ExportError("no trees")
    return {
        "format_version": DOCUMENT_VERSION,
        "aggregation": "majority_vote",
        "class_count": int(model.n_classes_),
        "feature_count": int(model.n_features_in_),
        "base_score": _real(0.0),
        "trees": trees,
    }


def export_gradient_boosting(model, calibration_size: int = 16,
                             calibration_seed: int = 0) -> dict:
    """sklearn GradientBoostingClassifier -> margin_sum document.

    Leaf values absorb the learning rate. The init estimator's contribution
    is recovered by comparing the native raw margin with the summed tree
    contributions on a small synthetic calibration set; binary models store
    it as base_score, multi-class models as one constant tree per class.
    """
    _require_fitted(model, "estimators_")
    loss = getattr(model, "loss", None) or getattr(model, "loss_", "")
    if str(loss) == "exponential":
        raise ExportError(f"unsupported objective: {loss}")
    stages = model.estimators_
    if len(stages) == 0:
        raise ExportError("no trees")
    classes = int(model.n_classes_)
    per_stage = stages.shape[1]
    lr = float(model.learning_rate)

    trees = []
    tree_classes = []
    for stage in stages:
        for cls in range(per_stage):
            tree = stage[cls].tree_
            trees.append({"root": _sklearn_node(
                tree, 0, leaf_value_of=lambda nd, t=tree: lr * float(t.value[nd][0][0]))})
            tree_classes.append(cls)

    rng = np.random.default_rng(calibration_seed)
    x_cal = rng.normal(0.0, 1.0, size=(calibration_size,
                                       int(model.n_features_in_)))
    native = model.decision_function(x_cal)
    summed = _sum_document_trees(trees, tree_classes, max(per_stage, 1), x_cal)
    intercept = native - summed
    spread = np.max(np.abs(intercept - intercept.mean(axis=0)), initial=0.0)
    if spread > 1e-9:
        raise ExportError(
            f"init contribution is not constant (spread {spread:.2e}); "
            "unsupported init estimator")
    intercept = np.atleast_1d(intercept.mean(axis=0))

    doc = {
        "format_version": DOCUMENT_VERSION,
        "aggregation": "margin_sum",
        "class_count": classes,
        "feature_count": int(model.n_features_in_),
        "trees": trees,
    }
    if per_stage == 1:
        # binary: a scalar margin, matching the native decision function
        doc["base_score"] = _real(float(intercept[0]))
    else:
        doc["base_score"] = _real(0.0)
        for cls, value in enumerate(intercept):
            trees.append({"root": {"leaf_value": _real(float(value))}})
            tree_classes.append(cls)
        doc["tree_classes"] = tree_classes
    return doc


def _require_fitted(model, attr):
    if not hasattr(model, attr):
        raise ExportError(f"model is not fitted (missing {attr})")


def _sum_document_trees(trees, tree_classes, class_count, X):
    """Evaluate the exported trees directly; the independent check that
    calibration and conversion stay faithful to the native margins."""
    out = np.zeros((X.shape[0], class_count))
    for entry, cls in zip(trees, tree_classes):
        for i, x in enumerate(X):
            out[i, cls] += _eval_record(entry["root"], x)
    return out if class_count > 1 else out[:, 0]


def _eval_record(record, x):
    while "feature" in record:
        if x[record["feature"]] <= float(record["threshold"]):
            record = record["left"]
        else:
            record = record["right"]
    return float(record["leaf_value"])


# --- XGBoost-format JSON dumps -------------------------------------------------

def _xgb_feature_index(split, feature_names):
    if isinstance(split, int):
        return split
    if feature_names and split in feature_names:
        return feature_names.index(split)
    if isinstance(split, str) and split.startswith("f") and split[1:].isdigit():
        return int(split[1:])
    raise ExportError(f"cannot resolve split feature {split!r}")


def _xgb_node(node, feature_names):
    if "leaf" in node:
        return {"leaf_value": _real(node["leaf"])}
    for key in ("split", "split_condition", "yes", "no", "children"):
        if key not in node:
            raise ExportError(f"dump node {node.get('nodeid')} missing {key!r}")
    if isinstance(node["split_condition"], str):
        raise ExportError("categorical splits are not supported")
    children = {child["nodeid"]: child for child in node["children"]}
    threshold = math.nextafter(float(node["split_condition"]), -math.inf)
    return {
        "feature": _xgb_feature_index(node["split"], feature_names),
        # native rule is "value < t goes left"; <= with the next double down
        # decides identically for every finite double
        "threshold": _real(threshold),
        "left": _xgb_node(children[node["yes"]], feature_names),
        "right": _xgb_node(children[node["no"]], feature_names),
    }


def export_xgboost_dump(dump, class_count: int, feature_count: int,
                        base_score: float = 0.0, feature_names=None) -> dict:
    """XGBoost get_dump(dump_format="json") content -> margin_sum document.

    class_count > 2 assumes the round-robin tree-to-class layout; base_score
    is taken in margin space.
    """
    if isinstance(dump, str):
        dump = json.loads(dump)
    if not isinstance(dump, list) or not dump:
        raise ExportError("no trees")
    trees = [{"root": _xgb_node(tree, feature_names)} for tree in dump]
    doc = {
        "format_version": DOCUMENT_VERSION,
        "aggregation": "margin_sum",
        "class_count": class_count,
        "feature_count": feature_count,
        "base_score": _real(base_score),
        "trees": trees,
    }
    if class_count > 2:
        doc["tree_classes"] = [i % class_count for i in range(len(trees))]
    return doc


# --- entry point ----------------------------------------------------------------

def export_model(model, out_path) -> dict:
    """Dispatch on model type and write the document; returns it as a dict."""
    kind = type(model).__name__
    if kind == "RandomForestClassifier":
        doc = export_random_forest(model)
    elif kind == "GradientBoostingClassifier":
        doc = export_gradient_boosting(model)
    else:
        raise ExportError(f"unsupported model type: {kind}")
    write_document(doc, out_path)
    return doc


def write_document(doc, out_path):
    with open(out_path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")
