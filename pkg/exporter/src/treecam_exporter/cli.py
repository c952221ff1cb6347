"""treecam-export: convert a saved model into the interchange document.

Inputs are either a pickled fitted sklearn model (.pkl/.joblib) or an
XGBoost-style JSON dump (.json, a list of tree objects; supply --class-count
and --feature-count since a bare dump carries no learner metadata).
"""

from __future__ import annotations

import argparse
import pickle
import sys

from .convert import (ExportError, export_model, export_xgboost_dump,
                      write_document)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="treecam-export")
    parser.add_argument("--in", dest="source", required=True,
                        help="model file: .pkl/.joblib (sklearn) or .json (dump)")
    parser.add_argument("--out", required=True,
                        help="interchange document output path")
    parser.add_argument("--class-count", type=int, default=None,
                        help="dump inputs: number of classes")
    parser.add_argument("--feature-count", type=int, default=None,
                        help="dump inputs: number of features")
    parser.add_argument("--base-score", type=float, default=0.0,
                        help="dump inputs: margin-space intercept")
    args = parser.parse_args(argv)

    try:
        if args.source.endswith(".json"):
            if args.class_count is None or args.feature_count is None:
                parser.error("dump inputs need --class-count and --feature-count")
            with open(args.source) as fh:
                dump = fh.read()
            doc = export_xgboost_dump(dump, class_count=args.class_count,
                                      feature_count=args.feature_count,
                                      base_score=args.base_score)
            write_document(doc, args.out)
        else:
            with open(args.source, "rb") as fh:
                model = pickle.load(fh)
            doc = export_model(model, args.out)
    except (ExportError, OSError, pickle.UnpicklingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out} ({len(doc['trees'])} trees, "
          f"{doc['aggregation']})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
