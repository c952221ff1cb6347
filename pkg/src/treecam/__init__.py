"""Tree-ensemble inference on ternary content-addressable memory.

Train bagged forests, prune them against an OOB accuracy-loss tolerance, map
root-to-leaf paths onto fixed-size ternary blocks with five placement
strategies, and verify every layout bit-exactly against reference traversal
with a behavioral simulator.
"""

__version__ = "0.1.0"

from .ensemble import (Condition, Dataset, Ensemble, MAJORITY_VOTE,
                       MARGIN_SUM, TrainingParams, Tree, TreeNode, accuracy,
                       classify, oob_accuracy, predict, predict_batch,
                       train_forest)
from .errors import DataError, InvariantError, TreecamError
from .pathspace import (ConditionIndex, Path, PathSet, encode_features,
                        encode_features_batch, estimate_condition_checks,
                        extract_paths, layout_size_bytes, layout_size_mib,
                        redundancy, redundancy_from_counts)
from .pruning import (NO_PRUNE_THRESHOLD, ModelComplexity, PruneResult,
                      model_complexity, prune_with_threshold,
                      purity_threshold_prune)
from .mapping import (Cluster, Layout, LayoutUnit, STRATEGIES, map_fr,
                      map_naive_independent, map_naive_unified, map_odr,
                      map_paths, map_spc, spc_clusters, tcam_count)
from .camsim import (CostReport, MatchResult, QueryPlan, TernaryBlock,
                     cam_predict, cost_report, match_block, match_layout,
                     matches_per_tree, pack_queries, retrieve)
from .formats import (load_dataset, load_ensemble, load_layout, load_report,
                      save_dataset, save_ensemble, save_layout, write_report)
from .sweep import SweepConfig, load_sweep_config, run_sweep
from .estimator import CamForestClassifier

__all__ = [name for name in dir() if not name.startswith("_")]
