"""Patient-grouped sample collections, CSV ingestion, and synthetic benchmarks.

Every sample carries a patient identity, and the pool and test splits never
share a patient, so test accuracy always measures generalization to unseen
patients. Ground-truth labels in the pool are treated as hidden until
revealed through :func:`reveal_label`, which stands in for the human
annotator and is the single audit point for label-budget accounting.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, replace
from typing import Iterator, Mapping

import numpy as np

from .errors import (
    ConfigError,
    CsvParseError,
    DataError,
    FeatureDimensionError,
    PatientOverlapError,
)

SPLIT_POOL = "pool"
SPLIT_TEST = "test"


@dataclass(frozen=True)
class Sample:
    """One data point: a feature vector plus patient identity and hidden label."""

    id: int
    patient: str
    features: np.ndarray
    label: int


class SampleSet:
    """Immutable columnar collection of samples with O(1) id lookup."""

    def __init__(self, ids, patients, features, labels):
        # copies, not views: the arrays get frozen below and must not alias
        # caller-owned data
        ids = np.array(ids, dtype=np.int64)
        features = np.array(features, dtype=np.float64)
        labels = np.array(labels, dtype=np.int64)
        patients = tuple(str(p) for p in patients)
        if features.ndim != 2:
            raise DataError("features must be a 2-D array of shape (n_samples, feature_dim)")
        n = features.shape[0]
        if not (len(ids) == len(patients) == len(labels) == n):
            raise DataError("ids, patients, features and labels must have equal length")
        if n == 0:
            raise DataError("a sample set must contain at least one sample")
        if ids.min() < 0:
            raise DataError("sample ids must be non-negative")
        if len(np.unique(ids)) != n:
            raise DataError("sample ids must be unique")
        if labels.min() < 0:
            raise DataError("labels must be non-negative")
        if not np.all(np.isfinite(features)):
            raise DataError("features must be finite (no NaN or Inf)")
        for arr in (ids, features, labels):
            arr.setflags(write=False)
        self.ids = ids
        self.patients = patients
        self.features = features
        self.labels = labels
        self._pos = {int(s): i for i, s in enumerate(ids)}

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, sample_id) -> bool:
        return int(sample_id) in self._pos

    def __iter__(self) -> Iterator[Sample]:
        for i in range(len(self.ids)):
            yield Sample(
                id=int(self.ids[i]),
                patient=self.patients[i],
                features=self.features[i],
                label=int(self.labels[i]),
            )

    def position(self, sample_id) -> int:
        pos = self._pos.get(int(sample_id))
        if pos is None:
            raise KeyError(f"unknown sample id {sample_id}")
        return pos

    def positions(self, sample_ids) -> np.ndarray:
        return np.array([self.position(s) for s in sample_ids], dtype=np.int64)

    def features_for(self, sample_ids) -> np.ndarray:
        return self.features[self.positions(sample_ids)]

    def patients_for(self, sample_ids) -> list[str]:
        return [self.patients[self.position(s)] for s in sample_ids]

    def sample(self, sample_id) -> Sample:
        i = self.position(sample_id)
        return Sample(
            id=int(self.ids[i]),
            patient=self.patients[i],
            features=self.features[i],
            label=int(self.labels[i]),
        )


@dataclass(frozen=True)
class DatasetSplit:
    """An unlabeled pool (with hidden labels) and a patient-disjoint test set."""

    pool: SampleSet
    test: SampleSet
    num_classes: int
    feature_dim: int

    def __post_init__(self):
        if self.num_classes < 2:
            raise DataError("a dataset needs at least 2 classes")
        for name, part in (("pool", self.pool), ("test", self.test)):
            if part.feature_dim != self.feature_dim:
                raise FeatureDimensionError(
                    f"{name} features have dimension {part.feature_dim}, expected {self.feature_dim}"
                )
            if int(part.labels.max()) >= self.num_classes:
                raise DataError(
                    f"{name} contains label {int(part.labels.max())} outside [0, {self.num_classes})"
                )
        shared_ids = np.intersect1d(self.pool.ids, self.test.ids)
        if len(shared_ids):
            raise DataError(f"sample id {int(shared_ids[0])} appears in both pool and test")
        shared_patients = sorted(set(self.pool.patients) & set(self.test.patients))
        if shared_patients:
            raise PatientOverlapError(shared_patients[0])


def patient_distribution(pool) -> dict[str, int]:
    """Multiplicity count per patient; counts sum to the pool size."""
    if isinstance(pool, SampleSet):
        return dict(Counter(pool.patients))
    return dict(Counter(s.patient for s in pool))


def reveal_label(pool: SampleSet, sample_id) -> int:
    """Simulated oracle: return the hidden ground-truth label of a pool sample.

    Serves only the pool; any other id raises KeyError. Idempotent.
    """
    return int(pool.labels[pool.position(sample_id)])


class LabeledSet:
    """The growing training set: pool ids whose labels have been revealed.

    Every addition goes through :func:`reveal_label`, so this is the one
    place where annotation budget is spent. Membership is ordered,
    duplicate-free, and only ever grows.
    """

    def __init__(self, pool: SampleSet):
        self._pool = pool
        self._ids: list[int] = []
        self._labels: list[int] = []
        self._members: set[int] = set()

    def extend(self, sample_ids) -> None:
        for sample_id in sample_ids:
            sample_id = int(sample_id)
            if sample_id in self._members:
                raise ValueError(f"sample {sample_id} is already labeled")
            label = reveal_label(self._pool, sample_id)  # rejects non-pool ids
            self._members.add(sample_id)
            self._ids.append(sample_id)
            self._labels.append(label)

    def __len__(self) -> int:
        return len(self._ids)

    def __contains__(self, sample_id) -> bool:
        return int(sample_id) in self._members

    @property
    def ids(self) -> list[int]:
        return list(self._ids)

    def features(self) -> np.ndarray:
        return self._pool.features_for(self._ids)

    def labels(self) -> np.ndarray:
        return np.array(self._labels, dtype=np.int64)


def normalize_features(split: DatasetSplit, mu: float, sigma: float) -> DatasetSplit:
    """Replace every feature x with (x - mu) / sigma, identically in pool and test."""
    if sigma <= 0:
        raise ConfigError(f"sigma must be > 0, got {sigma}")

    def transform(part: SampleSet) -> SampleSet:
        return SampleSet(part.ids, part.patients, (part.features - mu) / sigma, part.labels)

    return replace(split, pool=transform(split.pool), test=transform(split.test))


# ---------------------------------------------------------------------------
# Synthetic patient-structured benchmarks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ImageCountSpec:
    """How many images each patient contributes.

    "uniform" draws counts from [low, high]; "heavy_tailed" draws
    low - 1 + Zipf(skew) clipped at high, so a few patients dominate the pool.
    """

    kind: str = "uniform"
    low: int = 1
    high: int = 1
    skew: float = 2.0

    def validate(self) -> None:
        if self.kind not in ("uniform", "heavy_tailed"):
            raise ConfigError(f"images_per_patient kind must be 'uniform' or 'heavy_tailed', got {self.kind!r}")
        if self.low < 1:
            raise ConfigError("images_per_patient low must be >= 1")
        if self.high < self.low:
            raise ConfigError("images_per_patient high must be >= low")
        if self.kind == "heavy_tailed" and self.skew <= 1.0:
            raise ConfigError("heavy_tailed skew must be > 1")

    def draw(self, rng: np.random.Generator) -> int:
        if self.kind == "uniform":
            return int(rng.integers(self.low, self.high + 1))
        return int(min(self.high, self.low - 1 + rng.zipf(self.skew)))


@dataclass(frozen=True)
class SyntheticConfig:
    """Class-mean + per-patient-offset Gaussian generator.

    Each patient belongs to one class and owns an offset vector whose
    magnitude scales with ``patient_offset_scale``; the patient's images are
    Gaussian draws around (class mean + patient offset). Setting the offset
    scale to zero removes all intra-class patient structure, which makes the
    generator a one-knob test bed for whether patient identity matters.
    """

    num_classes: int
    num_patients: int
    images_per_patient: ImageCountSpec
    feature_dim: int
    class_separation: float
    patient_offset_scale: float
    test_fraction_of_patients: float
    noise_scale: float

    def validate(self) -> None:
        if self.num_classes < 2:
            raise ConfigError("num_classes must be >= 2")
        if self.num_patients < self.num_classes:
            raise ConfigError(
                f"num_patients ({self.num_patients}) must be >= num_classes ({self.num_classes})"
            )
        if self.feature_dim < 1:
            raise ConfigError("feature_dim must be >= 1")
        if self.class_separation <= 0:
            raise ConfigError("class_separation must be > 0")
        if self.patient_offset_scale < 0:
            raise ConfigError("patient_offset_scale must be >= 0")
        if not 0.0 < self.test_fraction_of_patients < 1.0:
            raise ConfigError("test_fraction_of_patients must be in (0, 1)")
        if self.noise_scale <= 0:
            raise ConfigError("noise_scale must be > 0")
        self.images_per_patient.validate()


def generate_synthetic(cfg: SyntheticConfig, seed: int) -> DatasetSplit:
    """Generate a patient-grouped split; a pure function of (cfg, seed).

    Patients are assigned classes round-robin; per class, a
    ``test_fraction_of_patients`` share of patients (at least one, never all)
    is held out entirely to the test split.
    """
    cfg.validate()
    rng = np.random.default_rng(seed)
    n_classes, n_patients, dim = cfg.num_classes, cfg.num_patients, cfg.feature_dim

    # Class means: random directions at distance class_separation from the origin.
    means = rng.standard_normal((n_classes, dim))
    norms = np.linalg.norm(means, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    means = cfg.class_separation * means / norms

    patient_class = np.arange(n_patients) % n_classes
    counts = np.array([cfg.images_per_patient.draw(rng) for _ in range(n_patients)])
    offsets = cfg.patient_offset_scale * rng.standard_normal((n_patients, dim))

    test_patients: set[int] = set()
    for c in range(n_classes):
        members = np.flatnonzero(patient_class == c)
        if len(members) < 2:
            raise ConfigError(
                f"class {c} has only {len(members)} patient(s); need >= 2 to hold out a test patient"
            )
        n_test = int(np.floor(cfg.test_fraction_of_patients * len(members) + 0.5))
        n_test = min(max(n_test, 1), len(members) - 1)
        test_patients.update(int(p) for p in rng.choice(members, size=n_test, replace=False))

    cols: dict[str, list] = {k: [] for k in ("ids", "patients", "labels", "in_test")}
    blocks: list[np.ndarray] = []
    next_id = 0
    for p in range(n_patients):
        c = int(patient_class[p])
        center = means[c] + offsets[p]
        blocks.append(center + cfg.noise_scale * rng.standard_normal((counts[p], dim)))
        for _ in range(int(counts[p])):
            cols["ids"].append(next_id)
            cols["patients"].append(f"p{p:04d}")
            cols["labels"].append(c)
            cols["in_test"].append(p in test_patients)
            next_id += 1

    features = np.concatenate(blocks, axis=0)
    in_test = np.array(cols["in_test"], dtype=bool)
    ids = np.array(cols["ids"], dtype=np.int64)
    labels = np.array(cols["labels"], dtype=np.int64)
    patients = np.array(cols["patients"], dtype=object)

    def part(mask: np.ndarray) -> SampleSet:
        return SampleSet(ids[mask], list(patients[mask]), features[mask], labels[mask])

    return DatasetSplit(
        pool=part(~in_test),
        test=part(in_test),
        num_classes=n_classes,
        feature_dim=dim,
    )


# ---------------------------------------------------------------------------
# CSV ingestion and serialization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CsvSchema:
    """Column-name mapping for dataset CSV files."""

    sample_id: str = "sample_id"
    patient_id: str = "patient_id"
    label: str = "label"
    split: str = "split"
    feature_prefix: str = "f"

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, str]) -> "CsvSchema":
        allowed = {"sample_id", "patient_id", "label", "split", "feature_prefix"}
        unknown = set(mapping) - allowed
        if unknown:
            raise ConfigError(f"unknown schema keys: {sorted(unknown)}")
        return cls(**{k: str(v) for k, v in mapping.items()})


def load_dataset(path, schema: CsvSchema | None = None) -> DatasetSplit:
    """Load a pool/test split from a feature CSV.

    Violations are rejected, never repaired: malformed rows raise a parse
    error with the offending line number, a patient present in both splits
    raises a disjointness error naming the patient, and rows whose feature
    count disagrees with the header raise a dimension error.
    """
    schema = schema or CsvSchema()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise CsvParseError(path, 1, "empty file: header row required")
        header = [h.strip() for h in header]

        col: dict[str, int] = {}
        for field in (schema.sample_id, schema.patient_id, schema.label, schema.split):
            if field not in header:
                raise CsvParseError(path, 1, f"missing required column {field!r}")
            col[field] = header.index(field)

        feature_cols: list[tuple[int, int]] = []
        known = set(col.values())
        for i, name in enumerate(header):
            if i in known:
                continue
            suffix = name[len(schema.feature_prefix):]
            if name.startswith(schema.feature_prefix) and suffix.isdigit():
                feature_cols.append((int(suffix), i))
            else:
                raise CsvParseError(path, 1, f"unexpected column {name!r}")
        feature_cols.sort()
        if not feature_cols:
            raise CsvParseError(path, 1, f"no feature columns ({schema.feature_prefix}0, ...) found")
        if [k for k, _ in feature_cols] != list(range(len(feature_cols))):
            raise CsvParseError(
                path, 1, f"feature columns must be contiguous {schema.feature_prefix}0..{schema.feature_prefix}{{d-1}}"
            )
        dim = len(feature_cols)
        feature_idx = [i for _, i in feature_cols]

        rows: dict[str, dict[str, list]] = {
            SPLIT_POOL: {"ids": [], "patients": [], "labels": [], "features": []},
            SPLIT_TEST: {"ids": [], "patients": [], "labels": [], "features": []},
        }
        seen_ids: dict[int, int] = {}
        for line_number, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) > len(header):
                raise FeatureDimensionError(
                    f"{path}:{line_number}: expected {dim} feature values, found {len(row) - len(header) + dim}"
                )
            if len(row) < len(header):
                raise CsvParseError(
                    path, line_number, f"expected {len(header)} columns, found {len(row)}"
                )
            try:
                sample_id = int(row[col[schema.sample_id]])
                label = int(row[col[schema.label]])
            except ValueError as exc:
                raise CsvParseError(path, line_number, str(exc)) from None
            if sample_id < 0:
                raise CsvParseError(path, line_number, f"sample id must be non-negative, got {sample_id}")
            if label < 0:
                raise CsvParseError(path, line_number, f"label must be non-negative, got {label}")
            patient = row[col[schema.patient_id]].strip()
            if not patient:
                raise CsvParseError(path, line_number, "empty patient id")
            split_value = row[col[schema.split]].strip()
            if split_value not in (SPLIT_POOL, SPLIT_TEST):
                raise CsvParseError(
                    path, line_number, f"split must be 'pool' or 'test', got {split_value!r}"
                )
            try:
                feats = [float(row[i]) for i in feature_idx]
            except ValueError as exc:
                raise CsvParseError(path, line_number, str(exc)) from None
            if not all(np.isfinite(feats)):
                raise CsvParseError(path, line_number, "non-finite feature value")
            if sample_id in seen_ids:
                raise CsvParseError(
                    path, line_number,
                    f"duplicate sample id {sample_id} (first seen on line {seen_ids[sample_id]})",
                )
            seen_ids[sample_id] = line_number
            bucket = rows[split_value]
            bucket["ids"].append(sample_id)
            bucket["patients"].append(patient)
            bucket["labels"].append(label)
            bucket["features"].append(feats)

    for name in (SPLIT_POOL, SPLIT_TEST):
        if not rows[name]["ids"]:
            raise DataError(f"{path}: the {name} split is empty")

    all_labels = rows[SPLIT_POOL]["labels"] + rows[SPLIT_TEST]["labels"]
    num_classes = max(all_labels) + 1
    if num_classes < 2:
        raise DataError(f"{path}: at least 2 classes required, found {num_classes}")

    def part(name: str) -> SampleSet:
        b = rows[name]
        return SampleSet(b["ids"], b["patients"], np.array(b["features"], dtype=np.float64), b["labels"])

    return DatasetSplit(
        pool=part(SPLIT_POOL), test=part(SPLIT_TEST),
        num_classes=num_classes, feature_dim=dim,
    )


def write_dataset(split: DatasetSplit, path, schema: CsvSchema | None = None) -> None:
    """Serialize a split to CSV such that load_dataset round-trips it exactly."""
    schema = schema or CsvSchema()
    header = [schema.sample_id, schema.patient_id, schema.label, schema.split]
    header += [f"{schema.feature_prefix}{i}" for i in range(split.feature_dim)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for split_name, part in ((SPLIT_POOL, split.pool), (SPLIT_TEST, split.test)):
            order = np.argsort(part.ids)
            for i in order:
                row = [int(part.ids[i]), part.patients[i], int(part.labels[i]), split_name]
                row += [repr(float(v)) for v in part.features[i]]
                writer.writerow(row)
