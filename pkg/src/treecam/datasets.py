"""Deterministic synthetic classification datasets.

Desk-scale stand-ins for the public tabular benchmarks the pipeline targets:
each spec mirrors a benchmark's feature count, class count, and rough
character (class balance, discrete vs continuous features), sized so full
sweeps stay in the minutes range. scripts/gen_fixtures.py materializes them
as CSVs under data/.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ensemble import Dataset


@dataclass(frozen=True)
class SyntheticSpec:
    name: str
    instances: int
    features: int
    classes: int
    label_noise: float
    integer_features: int = 0  # first k columns rounded to integers
    class_probs: tuple = ()  # empty = uniform
    cluster_spread: float = 1.0
    seed: int = 0


DESK_SPECS = {
    # imbalanced binary, mixed discrete/continuous, medium size
    "adultlike": SyntheticSpec("adultlike", 800, 14, 2, 0.10,
                               integer_features=4, class_probs=(0.75, 0.25),
                               cluster_spread=1.3, seed=101),
    # small binary
    "creditlike": SyntheticSpec("creditlike", 600, 15, 2, 0.08,
                                integer_features=3, cluster_spread=1.1,
                                seed=102),
    # 7-class continuous
    "beanlike": SyntheticSpec("beanlike", 770, 16, 7, 0.05,
                              cluster_spread=1.2, seed=103),
    # 26-class, all-integer features
    "letterlike": SyntheticSpec("letterlike", 900, 16, 26, 0.03,
                                integer_features=16, cluster_spread=0.9,
                                seed=104),
    # 11-class continuous
    "winelike": SyntheticSpec("winelike", 700, 11, 11, 0.05,
                              cluster_spread=1.1, seed=105),
}

SMALL_SPECS = {
    "blobs2": SyntheticSpec("blobs2", 120, 4, 2, 0.05, cluster_spread=0.8,
                            seed=201),
    "blobs3": SyntheticSpec("blobs3", 150, 5, 3, 0.05, cluster_spread=0.8,
                            seed=202),
}


def make_synthetic(spec: SyntheticSpec) -> Dataset:
    rng = np.random.default_rng(spec.seed)
    probs = np.asarray(spec.class_probs, dtype=np.float64)
    if probs.size == 0:
        probs = np.full(spec.classes, 1.0 / spec.classes)
    y = rng.choice(spec.classes, size=spec.instances, p=probs)
    means = rng.normal(0.0, 3.0, size=(spec.classes, spec.features))
    X = means[y] + rng.normal(0.0, spec.cluster_spread,
                              size=(spec.instances, spec.features))
    if spec.integer_features:
        k = spec.integer_features
        X[:, :k] = np.clip(np.round(X[:, :k] + 8.0), 0, 15)
    if spec.label_noise > 0:
        flip = rng.random(spec.instances) < spec.label_noise
        offset = rng.integers(1, spec.classes, size=spec.instances)
        y = np.where(flip, (y + offset) % spec.classes, y)
    return Dataset.from_arrays(X, y, class_count=spec.classes)


def make_named(name: str) -> Dataset:
    spec = DESK_SPECS.get(name) or SMALL_SPECS.get(name)
    if spec is None:
        raise KeyError(f"unknown synthetic dataset: {name}")
    return make_synthetic(spec)


def linearly_separable(n: int = 20) -> Dataset:
    """Toy set split by the sign of the first feature: x < 0 -> class 0."""
    half = n // 2
    x0 = np.concatenate([np.linspace(-2.0, -0.5, half),
                         np.linspace(0.5, 2.0, n - half)])
    x1 = np.linspace(0.0, 1.0, n)
    y = (x0 >= 0).astype(np.int64)
    return Dataset.from_arrays(np.column_stack([x0, x1]), y, class_count=2)
