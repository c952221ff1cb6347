"""File formats, CLI subcommands, and the sweep harness."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest
import yaml

import treecam as tc
from treecam.cli import main
from treecam.errors import DataError, EXIT_DATA, EXIT_OK, EXIT_USAGE
from treecam.sweep import SweepConfig, attach_improvement_factors, run_sweep

DATA_DIR = Path(__file__).resolve().parent.parent / "data"


def test_dataset_round_trip(tmp_path, blobs2):
    out = tmp_path / "ds.csv"
    tc.save_dataset(blobs2, out)
    again = tc.load_dataset(out)
    assert np.array_equal(again.feature_matrix, blobs2.feature_matrix)
    assert np.array_equal(again.labels, blobs2.labels)


def test_dataset_string_labels_first_appearance(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("f0,label\n1.0,setosa\n2.0,virginica\n3.0,setosa\n")
    ds = tc.load_dataset(path)
    assert ds.label_names == ["setosa", "virginica"]
    assert ds.labels.tolist() == [0, 1, 0]


def test_dataset_errors_carry_line_context(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("f0,f1,label\n1.0,2.0,a\n3.0,oops,b\n")
    with pytest.raises(DataError, match=r"bad\.csv:3"):
        tc.load_dataset(path)
    path.write_text("f0,f1,label\n1.0,2.0\n")
    with pytest.raises(DataError, match=r"bad\.csv:2"):
        tc.load_dataset(path)


def test_ensemble_round_trip_predictions(tmp_path, blobs3, blobs3_forest):
    out = tmp_path / "model.json"
    tc.save_ensemble(blobs3_forest, out)
    again = tc.load_ensemble(out)
    rng = np.random.default_rng(12)
    X = rng.normal(0, 3, size=(100, blobs3.feature_count))
    assert np.array_equal(tc.predict_batch(again, X),
                          tc.predict_batch(blobs3_forest, X))
    # thresholds and oob bookkeeping survive bit-exactly
    assert all(a == b for a, b in zip(again.trees, blobs3_forest.trees))
    assert tc.oob_accuracy(again, blobs3) == tc.oob_accuracy(blobs3_forest, blobs3)


def test_margin_document_round_trip(tmp_path, margin_multiclass):
    out = tmp_path / "margin.json"
    tc.save_ensemble(margin_multiclass, out)
    again = tc.load_ensemble(out)
    rng = np.random.default_rng(1)
    X = rng.uniform(0, 1, size=(50, margin_multiclass.feature_count))
    assert np.array_equal(tc.predict_batch(again, X),
                          tc.predict_batch(margin_multiclass, X))


def test_document_version_mismatch(tmp_path):
    path = tmp_path / "doc.json"
    path.write_text(json.dumps({"format_version": 99}))
    with pytest.raises(DataError, match="format_version"):
        tc.load_ensemble(path)


def test_document_unknown_aggregation(tmp_path):
    doc = {"format_version": 1, "aggregation": "averaging", "class_count": 2,
           "feature_count": 1, "trees": [{"root": {"leaf_class": 0}}]}
    path = tmp_path / "doc.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(DataError, match="aggregation"):
        tc.load_ensemble(path)


def test_document_field_context_in_errors(tmp_path):
    doc = {"format_version": 1, "aggregation": "majority_vote",
           "class_count": 2, "feature_count": 1,
           "trees": [{"root": {"feature": 0, "threshold": "0.5",
                               "left": {"leaf_class": 0}}}]}
    path = tmp_path / "doc.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(DataError, match=r"trees\[0\].*right"):
        tc.load_ensemble(path)


def test_unannotated_document_rejected_by_prune(tmp_path, margin_binary, blobs2):
    with pytest.raises(DataError, match="bagging-trained"):
        tc.purity_threshold_prune(margin_binary, blobs2, 0.03)


def test_layout_round_trip(tmp_path, blobs3_forest):
    ps = tc.extract_paths(blobs3_forest)
    layout = tc.map_odr(ps, 8)
    out = tmp_path / "layout.json"
    tc.save_layout(layout, out)
    again = tc.load_layout(out, ps)
    assert again.total_tcams == layout.total_tcams
    assert np.array_equal(again.deleted_blocks, layout.deleted_blocks)
    x = np.zeros(blobs3_forest.feature_count)
    assert tc.cam_predict(again, blobs3_forest, x) == \
        tc.cam_predict(layout, blobs3_forest, x)


def test_layout_model_mismatch_detected(tmp_path, blobs3_forest, t1_paths):
    ps = tc.extract_paths(blobs3_forest)
    out = tmp_path / "layout.json"
    tc.save_layout(tc.map_naive_unified(ps, 8), out)
    with pytest.raises(DataError, match="different model"):
        tc.load_layout(out, t1_paths)


def test_report_writers(tmp_path):
    rows = [{"dataset": "d", "model": "m", "strategy": "odr", "tcam_size": 8,
             "tcam_count": 5, "error": ""}]
    tc.write_report(rows, str(tmp_path / "r.csv"))
    tc.write_report(rows, str(tmp_path / "r.json"))
    assert tc.load_report(str(tmp_path / "r.json"))[0]["tcam_count"] == 5
    assert tc.load_report(str(tmp_path / "r.csv"))[0]["tcam_count"] == "5"
    with pytest.raises(DataError):
        tc.write_report(rows, str(tmp_path / "r.txt"))


def test_report_row_for_table_scale_counts():
    # a unified-mapping report row at Adult-scale counts carries the
    # expected nominal size
    row_size = tc.layout_size_mib(206152, 29436)
    assert row_size == pytest.approx(723.40, abs=0.01)


# --- CLI ----------------------------------------------------------------------

def test_cli_train_prune_paths_map_simulate(tmp_path, capsys):
    model = tmp_path / "model.json"
    pruned = tmp_path / "pruned.json"
    layout = tmp_path / "layout.json"

    assert main(["train", "--data", str(DATA_DIR / "blobs2.csv"),
                 "--out", str(model), "--trees", "10", "--seed", "3",
                 "--test-fraction", "0.3"]) == EXIT_OK
    assert main(["prune", "--model", str(model),
                 "--data", str(DATA_DIR / "blobs2.csv"),
                 "--test-fraction", "0.3",
                 "--tolerance", "3", "--out", str(pruned)]) == EXIT_OK
    assert main(["paths", "--model", str(pruned)]) == EXIT_OK
    assert '"path_count"' in capsys.readouterr().out
    assert main(["map", "--model", str(pruned), "--strategy", "odr",
                 "--tcam-size", "16", "--out", str(layout)]) == EXIT_OK
    assert main(["simulate", "--model", str(pruned),
                 "--data", str(DATA_DIR / "blobs2.csv"),
                 "--layout", str(layout), "--check-oracle"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "oracle check passed" in out


def test_cli_usage_and_data_errors(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["map", "--model", "x.json", "--strategy", "bogus",
              "--tcam-size", "8"])
    assert exc.value.code == EXIT_USAGE
    assert main(["paths", "--model", str(tmp_path / "missing.json")]) == EXIT_DATA


def test_cli_sweep_and_report(tmp_path):
    config = {
        "datasets": [str(DATA_DIR / "blobs2.csv")],
        "strategies": ["unified", "odr"],
        "tcam_sizes": [16],
        "tree_counts": [5],
        "seeds": [1],
        "tolerances_pct": [None, 3],
    }
    cfg = tmp_path / "sweep.yaml"
    cfg.write_text(yaml.safe_dump(config))
    stem = tmp_path / "rows"
    assert main(["sweep", "--config", str(cfg), "--out", str(stem)]) == EXIT_OK
    rows = tc.load_report(str(stem) + ".json")
    assert len(rows) == 4  # 1 dataset x 2 tolerances x 2 strategies x 1 size
    assert all(not r["error"] for r in rows)
    report = tmp_path / "report.csv"
    assert main(["report", "--rows", str(stem) + ".json",
                 "--out", str(report)]) == EXIT_OK
    assert "factor_vs_unified" in report.read_text().splitlines()[0]


# --- sweep engine ----------------------------------------------------------------

def test_sweep_cross_product_and_determinism(tmp_path):
    config = SweepConfig(datasets=[str(DATA_DIR / "blobs2.csv")],
                         strategies=["unified", "independent"],
                         tcam_sizes=[16, 32], tree_counts=[4], seeds=[7],
                         tolerances_pct=[None])
    rows_a = run_sweep(config)
    rows_b = run_sweep(config)
    assert len(rows_a) == 4
    strip = lambda rows: [{k: v for k, v in r.items() if k != "wall_clock_s"}
                          for r in rows]
    assert strip(rows_a) == strip(rows_b)


def test_sweep_independent_counts_match_formula():
    config = SweepConfig(datasets=[str(DATA_DIR / "blobs2.csv")],
                         strategies=["independent"], tcam_sizes=[16, 64, 128],
                         tree_counts=[6], seeds=[2], tolerances_pct=[None])
    rows = run_sweep(config)
    ds = tc.load_dataset(DATA_DIR / "blobs2.csv")
    train, _ = ds.split(config.test_fraction, config.split_seed)
    forest = tc.train_forest(train, tc.TrainingParams(num_trees=6, seed=2))
    ps = tc.extract_paths(forest)
    for row in rows:
        s = row["tcam_size"]
        expected = 0
        for start, end in ps.tree_ranges:
            conds = set()
            for pid in range(start, end):
                conds.update(ps.cond_ids(pid).tolist())
            expected += -(-len(conds) // s) * (-((start - end) // s))
        assert row["tcam_count"] == expected


def test_sweep_tcam_count_non_increasing_in_tolerance():
    config = SweepConfig(datasets=[str(DATA_DIR / "blobs3.csv")],
                         strategies=["unified"], tcam_sizes=[16],
                         tree_counts=[10], seeds=[3],
                         tolerances_pct=[1, 3, 5])
    rows = run_sweep(config)
    counts = [r["tcam_count"] for r in rows]
    assert counts == sorted(counts, reverse=True)


def test_sweep_records_cell_errors_and_continues(tmp_path):
    config = SweepConfig(datasets=[str(tmp_path / "missing.csv"),
                                   str(DATA_DIR / "blobs2.csv")],
                         strategies=["unified"], tcam_sizes=[16],
                         tree_counts=[3], seeds=[0], tolerances_pct=[None])
    rows = run_sweep(config)
    assert len(rows) == 2
    assert rows[0]["error"]
    assert not rows[1]["error"]


def test_sweep_spc_too_small_recorded_in_row():
    config = SweepConfig(datasets=[str(DATA_DIR / "blobs3.csv")],
                         strategies=["spc"], tcam_sizes=[2],
                         tree_counts=[3], seeds=[0], tolerances_pct=[None])
    rows = run_sweep(config)
    assert "TCAM too small" in rows[0]["error"]


def test_attach_improvement_factors():
    rows = [
        {"dataset": "d", "model": "m", "tcam_size": 16, "strategy": "unified",
         "tolerance_pct": None, "tcam_count": 100, "error": ""},
        {"dataset": "d", "model": "m", "tcam_size": 16, "strategy": "odr",
         "tolerance_pct": None, "tcam_count": 25, "error": ""},
    ]
    out = attach_improvement_factors(rows)
    assert out[1]["factor_vs_unified"] == 4.0
