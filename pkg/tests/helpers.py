"""Shared construction helpers for the test suite."""

from __future__ import annotations

import numpy as np

from decal.data import DatasetSplit, SampleSet
from decal.learner import Model


def make_sampleset(rows):
    """Build a SampleSet from (id, patient, features, label) tuples."""
    ids = [r[0] for r in rows]
    patients = [r[1] for r in rows]
    features = np.array([r[2] for r in rows], dtype=np.float64)
    labels = [r[3] for r in rows]
    return SampleSet(ids, patients, features, labels)


def make_split(pool_rows, test_rows, num_classes=None):
    pool = make_sampleset(pool_rows)
    test = make_sampleset(test_rows)
    if num_classes is None:
        num_classes = int(max(pool.labels.max(), test.labels.max())) + 1
    return DatasetSplit(pool=pool, test=test, num_classes=num_classes,
                        feature_dim=pool.feature_dim)


def linear_model(w_out, b_out):
    """A linear softmax model with explicit parameters."""
    w = np.array(w_out, dtype=np.float64)
    b = np.array(b_out, dtype=np.float64)
    return Model(w_hidden=None, b_hidden=None, w_out=w, b_out=b,
                 feature_dim=w.shape[0], num_classes=w.shape[1])


def split_equal(a, b) -> bool:
    def part_equal(x, y):
        return (
            np.array_equal(x.ids, y.ids)
            and x.patients == y.patients
            and np.array_equal(x.features, y.features)
            and np.array_equal(x.labels, y.labels)
        )

    return (
        a.num_classes == b.num_classes
        and a.feature_dim == b.feature_dim
        and part_equal(a.pool, b.pool)
        and part_equal(a.test, b.test)
    )
