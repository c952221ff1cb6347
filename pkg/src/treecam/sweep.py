"""Experiment sweeps: run the train -> prune -> map pipeline over the cross
product of datasets, tree counts, seeds, tolerances, strategies, and block
sizes, emitting one report row per cell. Deterministic for a fixed config."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .camsim import cost_report
from .ensemble import TrainingParams, accuracy, oob_accuracy, train_forest
from .errors import DataError
from .formats import load_dataset
from .mapping import STRATEGIES, map_paths
from .pathspace import extract_paths, layout_size_mib, redundancy
from .pruning import SEARCH_BINARY, purity_threshold_prune

DEFAULT_TEST_FRACTION = 0.3
DEFAULT_SPLIT_SEED = 73  # fixed so the 7:3 split is reproducible across runs


@dataclass
class SweepConfig:
    datasets: list[str]
    strategies: list[str] = field(default_factory=lambda: list(STRATEGIES))
    tcam_sizes: list[int] = field(default_factory=lambda: [64])
    tree_counts: list[int] = field(default_factory=lambda: [100])
    seeds: list[int] = field(default_factory=lambda: [0])
    # None means "no pruning"; numbers are percentage points of OOB loss
    tolerances_pct: list = field(default_factory=lambda: [None])
    test_fraction: float = DEFAULT_TEST_FRACTION
    split_seed: int = DEFAULT_SPLIT_SEED
    mtry: int | None = None
    min_samples_leaf: int = 1
    max_depth: int | None = None
    search: str = SEARCH_BINARY
    weighted_oob: bool = False
    jobs: int = 1


def load_sweep_config(path) -> SweepConfig:
    with open(path) as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise DataError(f"{path}: invalid YAML ({exc})") from None
    if not isinstance(raw, dict):
        raise DataError(f"{path}: config must be a mapping")
    if "datasets" not in raw or not raw["datasets"]:
        raise DataError(f"{path}: config needs a non-empty 'datasets' list")
    known = {f.name for f in SweepConfig.__dataclass_fields__.values()}
    unknown = set(raw) - known
    if unknown:
        raise DataError(f"{path}: unknown config keys: {sorted(unknown)}")
    config = SweepConfig(**raw)
    for strategy in config.strategies:
        if strategy not in STRATEGIES:
            raise DataError(f"{path}: unknown strategy {strategy!r}")
    return config


def _model_id(trees: int, seed: int) -> str:
    return f"rf{trees}_seed{seed}"


def run_sweep(config: SweepConfig, progress=None) -> list[dict]:
    """Execute every cell; failures are recorded in-row and do not stop the
    sweep. Rows come back in deterministic cross-product order."""
    rows: list[dict] = []
    for dataset_path in config.datasets:
        dataset_name = Path(dataset_path).stem
        try:
            full = load_dataset(dataset_path)
            train_part, test_part = full.split(config.test_fraction,
                                               config.split_seed)
        except Exception as exc:  # dataset-level failure poisons its cells
            rows.extend(_error_rows(config, dataset_name, str(exc)))
            continue
        for trees in config.tree_counts:
            for seed in config.seeds:
                rows.extend(_model_cells(config, dataset_name, train_part,
                                         test_part, trees, seed, progress))
    return rows


def _error_rows(config: SweepConfig, dataset_name: str, message: str) -> list[dict]:
    out = []
    for trees in config.tree_counts:
        for seed in config.seeds:
            for tol in config.tolerances_pct:
                for strategy in config.strategies:
                    for size in config.tcam_sizes:
                        out.append({"dataset": dataset_name,
                                    "model": _model_id(trees, seed),
                                    "tolerance_pct": tol, "strategy": strategy,
                                    "tcam_size": size, "error": message})
    return out


def _model_cells(config, dataset_name, train_part, test_part, trees, seed,
                 progress) -> list[dict]:
    model_id = _model_id(trees, seed)
    base = {"dataset": dataset_name, "model": model_id}
    try:
        params = TrainingParams(num_trees=trees, seed=seed, mtry=config.mtry,
                                min_samples_leaf=config.min_samples_leaf,
                                max_depth=config.max_depth)
        started = time.perf_counter()
        ensemble = train_forest(train_part, params)
        oob_base = oob_accuracy(ensemble, train_part,
                                weighted=config.weighted_oob)
        train_time = time.perf_counter() - started
    except Exception as exc:
        return [{**base, "tolerance_pct": tol, "strategy": strategy,
                 "tcam_size": size, "error": str(exc)}
                for tol in config.tolerances_pct
                for strategy in config.strategies
                for size in config.tcam_sizes]

    rows = []
    for tol in config.tolerances_pct:
        cell_base = {**base, "tolerance_pct": tol}
        try:
            if tol is None:
                model = ensemble
                threshold = None
                oob_after = oob_base
            else:
                result = purity_threshold_prune(
                    ensemble, train_part, tol / 100.0, search=config.search,
                    weighted=config.weighted_oob)
                model = result.pruned
                threshold = result.threshold
                oob_after = result.oob_after
            test_acc = accuracy(model, test_part.feature_matrix,
                                test_part.labels)
            path_set = extract_paths(model)
        except Exception as exc:
            rows.extend({**cell_base, "strategy": strategy, "tcam_size": size,
                         "error": str(exc)}
                        for strategy in config.strategies
                        for size in config.tcam_sizes)
            continue

        cells = [(strategy, size) for strategy in config.strategies
                 for size in config.tcam_sizes]

        def run_cell(cell):
            strategy, size = cell
            row = {**cell_base, "threshold": threshold, "strategy": strategy,
                   "tcam_size": size,
                   "path_count": path_set.path_count,
                   "unique_conditions": path_set.index.unique_condition_count,
                   "avg_path_length": round(path_set.avg_path_length, 6),
                   "redundancy": round(redundancy(path_set), 8),
                   "size_mib_nominal": round(layout_size_mib(
                       path_set.path_count,
                       path_set.index.unique_condition_count), 6),
                   "oob_accuracy": round(oob_base, 6),
                   "oob_after": round(oob_after, 6),
                   "test_accuracy": round(test_acc, 6),
                   "error": ""}
            started_cell = time.perf_counter()
            try:
                layout = map_paths(path_set, strategy, size)
                cost = cost_report(layout)
                row.update(tcam_count=layout.total_tcams,
                           query_bits_total=cost.query_bits_total,
                           shared_query_bits=cost.shared_query_bits,
                           condition_checks=round(cost.condition_checks, 3),
                           retrieval_ops=cost.retrieval_ops)
            except Exception as exc:
                row["error"] = str(exc)
            row["wall_clock_s"] = round(
                time.perf_counter() - started_cell + train_time / max(
                    len(cells) * len(config.tolerances_pct), 1), 4)
            return row

        if config.jobs > 1:
            with ThreadPoolExecutor(max_workers=config.jobs) as pool:
                rows.extend(pool.map(run_cell, cells))
        else:
            rows.extend(run_cell(cell) for cell in cells)
        if progress is not None:
            progress(f"{dataset_name} {model_id} tol={tol}: done")
    return rows


def attach_improvement_factors(rows: list[dict]) -> list[dict]:
    """Add baseline-relative improvement factors (baseline count divided by
    the strategy's count) within each (dataset, model, tcam_size) group.

    The energy-efficient reference is the unpruned unified layout; the
    space-efficient reference is the unpruned independent layout.
    """
    def key(row):
        return (row.get("dataset"), row.get("model"), row.get("tcam_size"))

    baselines: dict[tuple, dict[str, float]] = {}
    for row in rows:
        if row.get("error") or row.get("tolerance_pct") not in (None, ""):
            continue
        strategy = row.get("strategy")
        if strategy in ("unified", "independent") and row.get("tcam_count"):
            baselines.setdefault(key(row), {})[strategy] = float(row["tcam_count"])
    out = []
    for row in rows:
        row = dict(row)
        refs = baselines.get(key(row), {})
        count = row.get("tcam_count")
        if count:
            if "unified" in refs:
                row["factor_vs_unified"] = round(refs["unified"] / count, 4)
            if "independent" in refs:
                row["factor_vs_independent"] = round(refs["independent"] / count, 4)
        out.append(row)
    return out
