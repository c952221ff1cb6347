"""Input validation helpers shared by the core API and the sklearn-style estimator."""

from __future__ import annotations

import numpy as np

from .errors import DataError


def as_feature_matrix(X) -> np.ndarray:
    """Coerce X to a 2-D float64 array and reject non-finite values."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise DataError(f"feature matrix must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DataError(f"feature matrix must be non-empty, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        bad = np.argwhere(~np.isfinite(arr))[0]
        raise DataError(
            f"non-finite feature value at row {bad[0]}, column {bad[1]}"
        )
    return np.ascontiguousarray(arr)


def as_label_vector(y, class_count: int | None = None) -> np.ndarray:
    """Coerce y to a 1-D int64 array of class ids; optionally bound by class_count."""
    arr = np.asarray(y)
    if arr.ndim != 1:
        raise DataError(f"label vector must be 1-D, got shape {arr.shape}")
    if arr.size < 1:
        raise DataError("label vector is empty")
    if not np.issubdtype(arr.dtype, np.integer):
        as_int = arr.astype(np.int64)
        if not np.array_equal(as_int, arr):
            raise DataError("labels must be integer class ids")
        arr = as_int
    arr = arr.astype(np.int64)
    if arr.min() < 0:
        raise DataError(f"negative class id {arr.min()}")
    if class_count is not None and arr.max() >= class_count:
        raise DataError(
            f"class id {arr.max()} out of range for class_count={class_count}"
        )
    return arr


def check_instance(x, feature_count: int) -> np.ndarray:
    """Validate a single feature vector against the expected width."""
    arr = np.asarray(x, dtype=np.float64).ravel()
    if arr.size != feature_count:
        raise DataError(
            f"instance has {arr.size} values, expected {feature_count}"
        )
    if not np.isfinite(arr).all():
        raise DataError("non-finite feature value in instance")
    return arr
