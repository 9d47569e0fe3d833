"""Patient-identity plug-in: unique-patient batches and patient-diverse init.

Batch-level patient uniqueness is the deployable constraint: a query batch
contains at most one image per patient, so no single round concentrates its
annotation budget on one patient's imagery. The same idea seeds the very
first labeled set by drawing one image from each of n distinct patients.

Uniqueness is enforced per batch, not cumulatively across rounds, and
batches are always filled to their requested size: when distinct patients
run out, the remaining slots are taken by the best otherwise-skipped
candidates and counted in ``relaxed_count``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import acquisition, learner
from .data import SampleSet, patient_distribution

log = logging.getLogger(__name__)

DECAL_PREFIX = "decal_"
INIT_MODES = ("random", "decal")
STRATEGIES = acquisition.BASE_STRATEGIES + tuple(
    DECAL_PREFIX + name for name in acquisition.BASE_STRATEGIES
)


@dataclass(frozen=True)
class QueryBatch:
    """Ordered selection for one round.

    ``relaxed_count`` is the number of slots filled by the fallback rule;
    when it is zero, all members come from pairwise-distinct patients.
    """

    members: tuple[int, ...]
    relaxed_count: int = 0


def constrain_unique_patients(ranking: Sequence[int], patient_of: Mapping[int, str], k: int) -> QueryBatch:
    """Greedy walk of a ranking keeping only the first sample per patient.

    Accepts samples in ranking order while their patient is new to the
    batch, until k are accepted or the ranking is exhausted; any shortfall
    is filled with the best-ranked skipped samples. Whenever the ranking
    holds at least k distinct patients this equals keeping each patient's
    best-ranked sample and taking the top k of those.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > len(ranking):
        raise ValueError(f"k ({k}) exceeds ranking length ({len(ranking)})")
    if len(set(ranking)) != len(ranking):
        raise ValueError("ranking contains duplicate sample ids")

    chosen: list[int] = []
    skipped: list[int] = []
    seen_patients: set[str] = set()
    for sample_id in ranking:
        patient = patient_of[sample_id]
        if patient in seen_patients:
            skipped.append(int(sample_id))
        else:
            seen_patients.add(patient)
            chosen.append(int(sample_id))
            if len(chosen) == k:
                break

    relaxed = 0
    if len(chosen) < k:
        fill = skipped[: k - len(chosen)]
        relaxed = len(fill)
        chosen.extend(fill)
    return QueryBatch(members=tuple(chosen), relaxed_count=relaxed)


def select_badge_unique_patients(
    embeddings: Mapping[int, np.ndarray],
    patient_of: Mapping[int, str],
    k: int,
    seed: int,
) -> QueryBatch:
    """BADGE's D-squared seeding with already-selected patients masked out.

    Candidates whose patient is in the batch get zero sampling mass. When no
    new-patient candidate remains, the constraint is relaxed for that slot
    (counted in ``relaxed_count``) and seeding continues over all unpicked
    candidates. Zero total mass falls back to the lowest unpicked id, which
    keeps the all-distinct-patients case identical to plain select_badge.
    """
    ids, matrix = acquisition.embedding_matrix(embeddings)
    n = len(ids)
    if k < 0:
        raise ValueError("k must be >= 0")
    if k > n:
        raise ValueError(f"k ({k}) exceeds number of candidates ({n})")
    if k == 0:
        return QueryBatch(members=(), relaxed_count=0)

    patients = np.array([patient_of[i] for i in ids], dtype=object)
    rng = np.random.default_rng(seed)

    picked = np.zeros(n, dtype=bool)
    blocked = np.zeros(n, dtype=bool)  # rows whose patient is already in the batch
    norms_sq = np.einsum("ij,ij->i", matrix, matrix)
    current = int(np.argmax(norms_sq))
    order = [current]
    relaxed = 0
    picked[current] = True
    blocked |= patients == patients[current]
    dist_sq = _sq_distances(matrix, matrix[current])

    while len(order) < k:
        eligible = ~picked & ~blocked
        if eligible.any():
            weights = np.where(eligible, dist_sq, 0.0)
            total = weights.sum()
            if total > 0.0:
                current = int(rng.choice(n, p=weights / total))
            else:
                current = int(np.flatnonzero(eligible)[0])
        else:
            relaxed += 1
            weights = np.where(picked, 0.0, dist_sq)
            total = weights.sum()
            if total > 0.0:
                current = int(rng.choice(n, p=weights / total))
            else:
                current = int(np.flatnonzero(~picked)[0])
        picked[current] = True
        blocked |= patients == patients[current]
        order.append(current)
        dist_sq = np.minimum(dist_sq, _sq_distances(matrix, matrix[current]))

    return QueryBatch(members=tuple(ids[i] for i in order), relaxed_count=relaxed)


def _sq_distances(matrix: np.ndarray, center: np.ndarray) -> np.ndarray:
    diff = matrix - center
    return np.einsum("ij,ij->i", diff, diff)


def decal_initialize(pool: SampleSet, n: int, seed: int) -> QueryBatch:
    """Patient-diverse first labeled set: one image from each of n patients.

    Draws min(n, #patients) patients uniformly without replacement and one
    of each patient's images uniformly; if n exceeds the patient count the
    remainder is drawn uniformly from the unselected images and counted as
    relaxed. Deterministic in seed.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > len(pool):
        raise ValueError(f"n ({n}) exceeds pool size ({len(pool)})")

    distribution = patient_distribution(pool)
    log.debug(
        "initializing over %d patients (pool size %d, max images per patient %d)",
        len(distribution), len(pool), max(distribution.values()),
    )

    groups: dict[str, list[int]] = {}
    for sample_id, patient in zip(pool.ids, pool.patients):
        groups.setdefault(patient, []).append(int(sample_id))
    patients_sorted = sorted(groups)
    for patient in patients_sorted:
        groups[patient].sort()

    rng = np.random.default_rng(seed)
    n_patients = min(n, len(patients_sorted))
    members: list[int] = []
    for index in rng.choice(len(patients_sorted), size=n_patients, replace=False):
        images = groups[patients_sorted[int(index)]]
        members.append(images[int(rng.integers(len(images)))])

    relaxed = n - n_patients
    if relaxed:
        rest = sorted(set(int(i) for i in pool.ids) - set(members))
        for index in rng.choice(len(rest), size=relaxed, replace=False):
            members.append(rest[int(index)])
    return QueryBatch(members=tuple(members), relaxed_count=relaxed)


def random_initialize(pool: SampleSet, n: int, seed: int) -> QueryBatch:
    """Uniform sample of n images without replacement; patients may repeat."""
    if n > len(pool):
        raise ValueError(f"n ({n}) exceeds pool size ({len(pool)})")
    members = acquisition.select_random([int(i) for i in pool.ids], n, seed)
    return QueryBatch(members=tuple(members), relaxed_count=0)


def select_query_batch(
    strategy: str,
    model: learner.Model,
    pool: SampleSet,
    candidate_ids: Sequence[int],
    k: int,
    seed: int,
) -> QueryBatch:
    """Produce one round's batch, with or without the unique-patient plug-in.

    ``decal_*`` strategies wrap their baseline: score-based rankings are
    greedily deduplicated by patient, decal_random deduplicates a full
    random permutation, and decal_badge enforces the constraint inside the
    seeding loop itself.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    constrained = strategy.startswith(DECAL_PREFIX)
    base = strategy[len(DECAL_PREFIX):] if constrained else strategy

    ids = sorted(int(i) for i in candidate_ids)
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate candidate ids")
    if k > len(ids):
        raise ValueError(f"k ({k}) exceeds number of candidates ({len(ids)})")
    features = pool.features_for(ids)

    if base == "badge":
        grads = learner.gradient_embedding(model, features)
        embeddings = dict(zip(ids, grads))
        if constrained:
            patient_of = dict(zip(ids, pool.patients_for(ids)))
            return select_badge_unique_patients(embeddings, patient_of, k, seed)
        return QueryBatch(members=tuple(acquisition.select_badge(embeddings, k, seed)), relaxed_count=0)

    if base == "random":
        ranking = acquisition.select_random(ids, len(ids) if constrained else k, seed)
    else:
        ranking = acquisition.make_ranking(base, model, ids, features, k, seed)

    if not constrained:
        return QueryBatch(members=tuple(ranking[:k]), relaxed_count=0)
    patient_of = dict(zip(ids, pool.patients_for(ids)))
    return constrain_unique_patients(ranking, patient_of, k)
