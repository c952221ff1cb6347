"""scikit-learn style front end.

CamForestClassifier wraps the whole pipeline behind fit/predict so it drops
into sklearn tooling (pipelines, grid search, cross-validation): fit trains
the bagged forest, optionally prunes it within an OOB tolerance, extracts the
path set, and builds the requested CAM layout; predict runs simulated CAM
inference, which agrees with reference tree traversal by construction.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .camsim import cam_predict
from .ensemble import Dataset, TrainingParams, oob_accuracy, train_forest
from .errors import DataError
from .mapping import STRATEGIES, map_paths
from .pathspace import extract_paths
from .pruning import SEARCH_BINARY, purity_threshold_prune
from .validation import as_feature_matrix


class CamForestClassifier(BaseEstimator, ClassifierMixin):
    """Bagged forest classifier served from simulated ternary CAM blocks.

    Parameters mirror the pipeline: forest shape (num_trees, mtry,
    min_samples_leaf, max_depth, seed, class_weight), optional pruning
    (prune_tolerance as a fraction, e.g. 0.03), and the CAM placement
    (strategy, tcam_size).
    """

    def __init__(self, num_trees=25, mtry=None, min_samples_leaf=1,
                 max_depth=None, seed=0, class_weight=None,
                 prune_tolerance=None, strategy="spc", tcam_size=64,
                 search=SEARCH_BINARY, weighted_oob=False):
        self.num_trees = num_trees
        self.mtry = mtry
        self.min_samples_leaf = min_samples_leaf
        self.max_depth = max_depth
        self.seed = seed
        self.class_weight = class_weight
        self.prune_tolerance = prune_tolerance
        self.strategy = strategy
        self.tcam_size = tcam_size
        self.search = search
        self.weighted_oob = weighted_oob

    def fit(self, X, y):
        X = as_feature_matrix(X)
        y = np.asarray(y)
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise DataError("y must be 1-D and aligned with X")
        if self.strategy not in STRATEGIES:
            raise DataError(f"unknown strategy: {self.strategy!r}")
        self.classes_, encoded = np.unique(y, return_inverse=True)
        class_count = len(self.classes_)
        weights = self._resolve_class_weight(encoded, class_count)
        dataset = Dataset.from_arrays(X, encoded, class_count=class_count,
                                      class_weights=weights)
        params = TrainingParams(num_trees=self.num_trees, seed=self.seed,
                                mtry=self.mtry,
                                min_samples_leaf=self.min_samples_leaf,
                                max_depth=self.max_depth)
        ensemble = train_forest(dataset, params)
        self.oob_score_ = oob_accuracy(ensemble, dataset,
                                       weighted=self.weighted_oob)
        self.prune_result_ = None
        if self.prune_tolerance is not None:
            self.prune_result_ = purity_threshold_prune(
                ensemble, dataset, self.prune_tolerance, search=self.search,
                weighted=self.weighted_oob)
            ensemble = self.prune_result_.pruned
        self.ensemble_ = ensemble
        self.path_set_ = extract_paths(ensemble)
        self.layout_ = map_paths(self.path_set_, self.strategy, self.tcam_size)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "layout_")
        X = as_feature_matrix(X)
        encoded = cam_predict(self.layout_, self.ensemble_, X)
        return self.classes_[encoded]

    def _resolve_class_weight(self, encoded, class_count):
        if self.class_weight is None:
            return None
        if self.class_weight == "balanced":
            counts = np.maximum(np.bincount(encoded, minlength=class_count), 1)
            return encoded.shape[0] / (class_count * counts.astype(np.float64))
        if isinstance(self.class_weight, dict):
            weights = np.ones(class_count, dtype=np.float64)
            for label, w in self.class_weight.items():
                pos = np.nonzero(self.classes_ == label)[0]
                if pos.size != 1:
                    raise DataError(f"class_weight key {label!r} not in classes")
                weights[pos[0]] = w
            return weights
        raise DataError("class_weight must be None, 'balanced', or a dict")

    @property
    def tcam_count_(self) -> int:
        check_is_fitted(self, "layout_")
        return self.layout_.total_tcams
