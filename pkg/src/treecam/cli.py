"""Command-line interface orchestrating train -> prune -> paths -> map ->
simulate -> sweep -> report.

Exit codes: 0 success, 1 usage error, 2 data error, 3 invariant violation.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .camsim import cam_predict, cost_report, matches_per_tree, match_layout, pack_queries
from .ensemble import (MAJORITY_VOTE, TrainingParams, accuracy,
                       oob_accuracy, predict_batch, train_forest)
from .errors import (DataError, EXIT_DATA, EXIT_INVARIANT, EXIT_OK,
                     EXIT_USAGE, InvariantError, TreecamError)
from .formats import (load_dataset, load_ensemble, load_layout, load_report,
                      save_ensemble, save_layout, write_report)
from .mapping import STRATEGIES, map_paths
from .pathspace import (encode_features_batch, extract_paths, layout_size_mib,
                        redundancy)
from .pruning import SEARCH_BINARY, SEARCH_EXHAUSTIVE, purity_threshold_prune
from .sweep import (DEFAULT_SPLIT_SEED, attach_improvement_factors,
                    load_sweep_config, run_sweep)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> _Parser:
    parser = _Parser(prog="treecam",
                     description="Tree ensembles on ternary CAM: train, "
                                 "prune, map, and simulate")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a bagged forest from a CSV dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="ensemble document path (.json)")
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mtry", type=int, default=None)
    p.add_argument("--min-samples-leaf", type=int, default=1)
    p.add_argument("--max-depth", type=int, default=None)
    p.add_argument("--class-weight", choices=["none", "balanced"], default="none")
    p.add_argument("--test-fraction", type=float, default=0.0,
                   help="hold out this fraction for a test accuracy report")
    p.add_argument("--split-seed", type=int, default=DEFAULT_SPLIT_SEED)

    p = sub.add_parser("prune", help="purity-threshold prune within an OOB tolerance")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="the training CSV")
    p.add_argument("--tolerance", type=float, required=True,
                   help="allowed OOB accuracy loss in percentage points")
    p.add_argument("--out", required=True)
    p.add_argument("--search", choices=[SEARCH_BINARY, SEARCH_EXHAUSTIVE],
                   default=SEARCH_BINARY)
    p.add_argument("--weighted-oob", action="store_true")
    p.add_argument("--test-fraction", type=float, default=0.0,
                   help="re-create the train split used by `train`")
    p.add_argument("--split-seed", type=int, default=DEFAULT_SPLIT_SEED)

    p = sub.add_parser("paths", help="path/condition statistics of a model")
    p.add_argument("--model", required=True)
    p.add_argument("--out", default=None, help="optional JSON output path")

    p = sub.add_parser("map", help="place paths into S x S ternary blocks")
    p.add_argument("--model", required=True)
    p.add_argument("--strategy", required=True, choices=list(STRATEGIES))
    p.add_argument("--tcam-size", type=int, required=True)
    p.add_argument("--out", default=None, help="optional layout export path")

    p = sub.add_parser("simulate", help="run CAM inference for a layout")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="CSV of instances to classify")
    p.add_argument("--strategy", choices=list(STRATEGIES), default=None)
    p.add_argument("--tcam-size", type=int, default=64)
    p.add_argument("--layout", default=None,
                   help="load an exported layout instead of mapping now")
    p.add_argument("--check-oracle", action="store_true",
                   help="compare every CAM prediction with reference traversal")
    p.add_argument("--out", default=None, help="write predictions as JSON")

    p = sub.add_parser("sweep", help="run the cross-product experiment sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True,
                   help="output stem; writes <stem>.csv and <stem>.json")

    p = sub.add_parser("report", help="add baseline-relative factors to sweep rows")
    p.add_argument("--rows", required=True, help="sweep output (.json or .csv)")
    p.add_argument("--out", required=True, help="report path (.csv or .json)")
    return parser


def _cmd_train(args) -> int:
    dataset = load_dataset(args.data)
    if args.class_weight == "balanced":
        dataset.class_weights = dataset.balanced_weights()
    test_part = None
    if args.test_fraction > 0:
        dataset, test_part = dataset.split(args.test_fraction, args.split_seed)
    params = TrainingParams(num_trees=args.trees, seed=args.seed,
                            mtry=args.mtry,
                            min_samples_leaf=args.min_samples_leaf,
                            max_depth=args.max_depth)
    ensemble = train_forest(dataset, params)
    oob = oob_accuracy(ensemble, dataset)
    save_ensemble(ensemble, args.out)
    print(f"trained {args.trees} trees on {dataset.instance_count} instances; "
          f"OOB accuracy {oob:.4f}")
    if test_part is not None:
        print(f"test accuracy {accuracy(ensemble, test_part.feature_matrix, test_part.labels):.4f}")
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_prune(args) -> int:
    ensemble = load_ensemble(args.model)
    dataset = load_dataset(args.data)
    if args.test_fraction > 0:
        dataset, _ = dataset.split(args.test_fraction, args.split_seed)
    result = purity_threshold_prune(ensemble, dataset,
                                    args.tolerance / 100.0,
                                    search=args.search,
                                    weighted=args.weighted_oob)
    save_ensemble(result.pruned, args.out)
    print(f"threshold {result.threshold:.6f}: removed {result.nodes_removed} "
          f"nodes; OOB {result.oob_before:.4f} -> {result.oob_after:.4f} "
          f"(tolerance {args.tolerance / 100.0:.4f})")
    print(f"wrote {args.out}")
    return EXIT_OK


def _paths_stats(ensemble) -> dict:
    ps = extract_paths(ensemble)
    return {
        "tree_count": ensemble.tree_count,
        "path_count": ps.path_count,
        "unique_conditions": ps.index.unique_condition_count,
        "avg_path_length": round(ps.avg_path_length, 4),
        "max_path_length": ps.max_path_length,
        "redundancy": round(redundancy(ps), 6),
        "size_mib_nominal": round(layout_size_mib(
            ps.path_count, ps.index.unique_condition_count), 4),
    }


def _cmd_paths(args) -> int:
    stats = _paths_stats(load_ensemble(args.model))
    text = json.dumps(stats, indent=1)
    print(text)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    return EXIT_OK


def _cmd_map(args) -> int:
    ensemble = load_ensemble(args.model)
    path_set = extract_paths(ensemble)
    layout = map_paths(path_set, args.strategy, args.tcam_size)
    cost = cost_report(layout)
    print(f"{args.strategy} at S={args.tcam_size}: {layout.total_tcams} TCAMs, "
          f"query bits {cost.query_bits_total} "
          f"(shared {cost.shared_query_bits}), "
          f"retrieval ops {cost.retrieval_ops}")
    if args.out:
        save_layout(layout, args.out)
        print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    ensemble = load_ensemble(args.model)
    dataset = load_dataset(args.data)
    path_set = extract_paths(ensemble)
    if args.layout:
        layout = load_layout(args.layout, path_set)
    else:
        if not args.strategy:
            raise DataError("simulate needs --strategy or --layout")
        layout = map_paths(path_set, args.strategy, args.tcam_size)
    X = dataset.feature_matrix
    cam_out = cam_predict(layout, ensemble, X)

    truth = encode_features_batch(X, path_set.index)
    per_tree = matches_per_tree(layout, match_layout(layout, pack_queries(layout, truth)))
    if not (per_tree == 1).all():
        raise InvariantError("a tree matched != 1 path for some instance")

    if args.check_oracle:
        reference = predict_batch(ensemble, X)
        if ensemble.aggregation == MAJORITY_VOTE:
            mismatches = int(np.sum(cam_out != reference))
        else:
            mismatches = int(np.sum(np.abs(cam_out - reference) > 1e-9))
        if mismatches:
            raise InvariantError(
                f"CAM predictions diverge from reference traversal on "
                f"{mismatches} of {X.shape[0]} instances")
        print(f"oracle check passed on {X.shape[0]} instances")
    if ensemble.aggregation == MAJORITY_VOTE:
        agreement = float(np.mean(cam_out == dataset.labels))
        print(f"simulated {X.shape[0]} instances; label agreement {agreement:.4f}")
    else:
        print(f"simulated {X.shape[0]} instances (margin model)")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump({"predictions": np.asarray(cam_out).tolist()}, fh)
            fh.write("\n")
        print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    config = load_sweep_config(args.config)
    rows = run_sweep(config, progress=lambda msg: print(msg, flush=True))
    write_report(rows, args.out + ".csv")
    write_report(rows, args.out + ".json")
    failures = sum(1 for row in rows if row.get("error"))
    print(f"{len(rows)} cells ({failures} failed); wrote {args.out}.csv / .json")
    return EXIT_OK


def _cmd_report(args) -> int:
    rows = attach_improvement_factors(load_report(args.rows))
    write_report(rows, args.out)
    print(f"wrote {args.out} ({len(rows)} rows)")
    return EXIT_OK


_COMMANDS = {
    "train": _cmd_train,
    "prune": _cmd_prune,
    "paths": _cmd_paths,
    "map": _cmd_map,
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except InvariantError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TreecamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
