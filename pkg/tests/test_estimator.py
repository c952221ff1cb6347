"""The sklearn-style facade: conventions, ecosystem composition, and parity
with the underlying pipeline."""

from __future__ import annotations

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.model_selection import GridSearchCV, cross_val_score
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import StandardScaler

import treecam as tc
from treecam.errors import DataError


def toy_data(seed=0, n=120):
    rng = np.random.default_rng(seed)
    X = rng.normal(0, 2, size=(n, 4))
    y = np.where(X[:, 0] + X[:, 1] > 0, "pos", "neg")
    flip = rng.random(n) < 0.05
    y = np.where(flip, np.where(y == "pos", "neg", "pos"), y)
    return X, y


def test_fit_predict_with_string_labels():
    X, y = toy_data()
    clf = tc.CamForestClassifier(num_trees=10, seed=1, tcam_size=32)
    clf.fit(X, y)
    preds = clf.predict(X)
    assert set(preds) <= {"neg", "pos"}
    assert (preds == y).mean() > 0.9
    assert 0 <= clf.oob_score_ <= 1
    assert clf.tcam_count_ >= 1


def test_predict_equals_reference_traversal():
    X, y = toy_data(3)
    clf = tc.CamForestClassifier(num_trees=8, seed=2, strategy="odr",
                                 tcam_size=32).fit(X, y)
    encoded = tc.predict_batch(clf.ensemble_, X)
    assert np.array_equal(clf.predict(X), clf.classes_[encoded])


def test_get_set_params_and_clone():
    clf = tc.CamForestClassifier(num_trees=7, strategy="fr", tcam_size=16)
    params = clf.get_params()
    assert params["num_trees"] == 7 and params["strategy"] == "fr"
    other = clone(clf).set_params(num_trees=3)
    assert other.get_params()["num_trees"] == 3
    assert clf.get_params()["num_trees"] == 7


def test_pruning_through_estimator():
    X, y = toy_data(5, n=150)
    clf = tc.CamForestClassifier(num_trees=12, seed=4, prune_tolerance=0.03,
                                 tcam_size=32).fit(X, y)
    assert clf.prune_result_ is not None
    assert clf.prune_result_.oob_before - clf.prune_result_.oob_after <= 0.03
    unpruned = tc.CamForestClassifier(num_trees=12, seed=4,
                                      tcam_size=32).fit(X, y)
    assert clf.tcam_count_ <= unpruned.tcam_count_


def test_composes_with_pipeline_and_grid_search():
    X, y = toy_data(7)
    pipe = make_pipeline(StandardScaler(),
                         tc.CamForestClassifier(num_trees=6, seed=0,
                                                tcam_size=32))
    scores = cross_val_score(pipe, X, y, cv=2)
    assert scores.shape == (2,)
    grid = GridSearchCV(
        tc.CamForestClassifier(num_trees=4, seed=0, tcam_size=32),
        {"strategy": ["independent", "spc"]}, cv=2)
    grid.fit(X, y)
    assert grid.best_params_["strategy"] in ("independent", "spc")


def test_class_weight_options():
    X, y = toy_data(9)
    balanced = tc.CamForestClassifier(num_trees=5, seed=1, tcam_size=32,
                                      class_weight="balanced").fit(X, y)
    explicit = tc.CamForestClassifier(num_trees=5, seed=1, tcam_size=32,
                                      class_weight={"neg": 2.0, "pos": 1.0})
    explicit.fit(X, y)
    assert balanced.ensemble_.tree_count == 5
    with pytest.raises(DataError):
        tc.CamForestClassifier(class_weight="bogus").fit(X, y)


def test_invalid_inputs_rejected():
    X, y = toy_data(11)
    with pytest.raises(DataError):
        tc.CamForestClassifier(strategy="warp").fit(X, y)
    bad = X.copy()
    bad[0, 0] = np.inf
    with pytest.raises(DataError, match="non-finite"):
        tc.CamForestClassifier().fit(bad, y)
