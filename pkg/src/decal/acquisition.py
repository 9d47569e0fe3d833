"""Baseline acquisition strategies: uncertainty scorers, top-k, random, BADGE.

All scorers follow one convention — HIGHER score means more informative — so
a single tie-break rule (ascending sample id) and a single top-k path serve
every strategy. Margin is negated to fit the convention; entropy uses the
natural log, so its range is [0, ln C].
"""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from . import learner

SCORE_STRATEGIES = ("entropy", "margin", "least_confidence")
BASE_STRATEGIES = ("random", "entropy", "margin", "least_confidence", "badge")

PROBABILITY_TOL = 1e-9


def _check_probs(p, expect_vector: bool = False) -> np.ndarray:
    """Validate probability rows; returns a clipped float64 2-D array."""
    arr = np.asarray(p, dtype=np.float64)
    if expect_vector and arr.ndim != 1:
        raise ValueError("expected a single probability vector")
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] < 2:
        raise ValueError("probability vectors need at least 2 entries")
    if not np.all(np.isfinite(arr)):
        raise ValueError("probability vector contains non-finite entries")
    if arr.min() < -PROBABILITY_TOL or arr.max() > 1.0 + PROBABILITY_TOL:
        raise ValueError("probability entries must lie in [0, 1]")
    if np.any(np.abs(arr.sum(axis=1) - 1.0) > PROBABILITY_TOL):
        raise ValueError("probability entries must sum to 1")
    return np.clip(arr, 0.0, 1.0)


def _entropy_rows(p: np.ndarray) -> np.ndarray:
    # 0 * ln 0 := 0, so one-hot vectors score exactly 0 (the +0.0 avoids -0.0)
    safe = np.where(p > 0.0, p, 1.0)
    return -np.sum(np.where(p > 0.0, p * np.log(safe), 0.0), axis=1) + 0.0


def _margin_rows(p: np.ndarray) -> np.ndarray:
    part = np.partition(p, p.shape[1] - 2, axis=1)
    return -(part[:, -1] - part[:, -2])


def _least_confidence_rows(p: np.ndarray) -> np.ndarray:
    return 1.0 - p.max(axis=1)


_ROW_SCORERS = {
    "entropy": _entropy_rows,
    "margin": _margin_rows,
    "least_confidence": _least_confidence_rows,
}


def score_entropy(p) -> float:
    """Shannon entropy -sum_c p_c ln p_c; in [0, ln C]."""
    return float(_entropy_rows(_check_probs(p, expect_vector=True))[0])


def score_margin(p) -> float:
    """Negated gap between the two largest entries; in [-1, 0]."""
    return float(_margin_rows(_check_probs(p, expect_vector=True))[0])


def score_least_confidence(p) -> float:
    """1 minus the maximum entry; in [0, 1 - 1/C]."""
    return float(_least_confidence_rows(_check_probs(p, expect_vector=True))[0])


def score_rows(strategy: str, probs) -> np.ndarray:
    """Vectorized scorer over rows of a probability matrix."""
    if strategy not in _ROW_SCORERS:
        raise ValueError(f"unknown score strategy {strategy!r}")
    return _ROW_SCORERS[strategy](_check_probs(probs))


def select_top_k(scores, k: int) -> list[int]:
    """The k highest-scoring ids; ties broken by ascending sample id."""
    if isinstance(scores, Mapping):
        items = [(int(i), float(v)) for i, v in scores.items()]
    else:
        items = [(int(i), float(v)) for i, v in scores]
    if k < 0:
        raise ValueError("k must be >= 0")
    if k > len(items):
        raise ValueError(f"k ({k}) exceeds number of scored samples ({len(items)})")
    if len({i for i, _ in items}) != len(items):
        raise ValueError("duplicate sample ids in scores")
    if not all(np.isfinite(v) for _, v in items):
        raise ValueError("scores must be finite")
    items.sort(key=lambda item: (-item[1], item[0]))
    return [i for i, _ in items[:k]]


def select_random(candidates: Sequence[int], k: int, seed: int) -> list[int]:
    """Uniform sample of k ids without replacement, deterministic in seed."""
    ids = sorted(int(i) for i in candidates)
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate candidate ids")
    if k < 0:
        raise ValueError("k must be >= 0")
    if k > len(ids):
        raise ValueError(f"k ({k}) exceeds number of candidates ({len(ids)})")
    rng = np.random.default_rng(seed)
    return [ids[i] for i in rng.permutation(len(ids))[:k]]


def embedding_matrix(embeddings: Mapping[int, np.ndarray]) -> tuple[list[int], np.ndarray]:
    """Stack an id -> embedding map into (ascending ids, row matrix)."""
    ids = sorted(int(i) for i in embeddings)
    if not ids:
        raise ValueError("no embeddings given")
    matrix = np.array([np.asarray(embeddings[i], dtype=np.float64).ravel() for i in ids])
    if not np.all(np.isfinite(matrix)):
        raise ValueError("embeddings must be finite")
    return ids, matrix


def select_badge(embeddings: Mapping[int, np.ndarray], k: int, seed: int) -> list[int]:
    """k-means++ seeding over gradient embeddings.

    First pick is the maximum-norm embedding (ties toward the lowest id);
    each later pick is drawn with probability proportional to its squared
    distance to the nearest already-picked embedding. If the remaining
    distance mass is all zero, the lowest-id unpicked candidate is taken.
    """
    ids, matrix = embedding_matrix(embeddings)
    n = len(ids)
    if k < 0:
        raise ValueError("k must be >= 0")
    if k > n:
        raise ValueError(f"k ({k}) exceeds number of candidates ({n})")
    if k == 0:
        return []

    rng = np.random.default_rng(seed)
    picked = np.zeros(n, dtype=bool)
    norms_sq = np.einsum("ij,ij->i", matrix, matrix)
    current = int(np.argmax(norms_sq))  # first occurrence = lowest id (rows are id-ascending)
    picked[current] = True
    order = [current]
    dist_sq = _sq_distances(matrix, matrix[current])

    while len(order) < k:
        weights = np.where(picked, 0.0, dist_sq)
        total = weights.sum()
        if total > 0.0:
            current = int(rng.choice(n, p=weights / total))
        else:
            current = int(np.flatnonzero(~picked)[0])
        picked[current] = True
        order.append(current)
        dist_sq = np.minimum(dist_sq, _sq_distances(matrix, matrix[current]))

    return [ids[i] for i in order]


def _sq_distances(matrix: np.ndarray, center: np.ndarray) -> np.ndarray:
    diff = matrix - center
    return np.einsum("ij,ij->i", diff, diff)


def make_ranking(strategy: str, model, ids: Sequence[int], features, k: int, seed: int) -> list[int]:
    """Rank candidates by informativeness under a baseline strategy.

    Score-based strategies return the FULL descending ranking of all
    candidates so downstream constraints can consume more than k; random and
    badge return exactly k ids.
    """
    if strategy not in BASE_STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {BASE_STRATEGIES}")
    id_list = [int(i) for i in ids]
    if len(set(id_list)) != len(id_list):
        raise ValueError("duplicate candidate ids")
    if k > len(id_list):
        raise ValueError(f"k ({k}) exceeds number of candidates ({len(id_list)})")

    if strategy == "random":
        return select_random(id_list, k, seed)

    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != len(id_list):
        raise ValueError("features must be one row per candidate id")

    if strategy == "badge":
        grads = learner.gradient_embedding(model, x)
        return select_badge(dict(zip(id_list, grads)), k, seed)

    values = score_rows(strategy, learner.predict_proba(model, x))
    return select_top_k(dict(zip(id_list, values)), len(id_list))
