"""Active-learning trials: initialize, train, evaluate, query, repeat.

A trial is fully deterministic in (config, trial_seed): the dataset draw
depends only on the config's base seed, and every stochastic step inside a
trial (init batch, per-round model reset, minibatch order, query sampling)
gets its own seed derived from (trial_seed, round, purpose), so trials can
run in any order or in parallel without changing results.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import learner, patients
from .data import (
    CsvSchema,
    DatasetSplit,
    LabeledSet,
    SyntheticConfig,
    generate_synthetic,
    load_dataset,
    normalize_features,
)
from .errors import ConfigError, InvariantViolation
from .presets import get_preset

log = logging.getLogger(__name__)

_INIT_STREAM = 0
_MODEL_STREAM = 1
_TRAIN_STREAM = 2
_QUERY_STREAM = 3


def derive_seed(trial_seed: int, round_index: int, stream: int) -> int:
    """Stable per-(trial, round, purpose) seed, independent of execution order."""
    sequence = np.random.SeedSequence([int(trial_seed), int(round_index), int(stream)])
    return int(sequence.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class DatasetSource:
    """Where a trial's data comes from: a CSV file, a preset, or a synthetic config.

    ``normalize`` optionally applies the fixed (x - mu) / sigma transform to
    every feature after loading or generation.
    """

    csv_path: str | None = None
    schema: CsvSchema | None = None
    synthetic: SyntheticConfig | None = None
    preset: str | None = None
    normalize: tuple[float, float] | None = None

    def validate(self) -> None:
        sources = [s is not None for s in (self.csv_path, self.synthetic, self.preset)]
        if sum(sources) != 1:
            raise ConfigError("dataset must specify exactly one of csv_path, synthetic, preset")
        if self.schema is not None and self.csv_path is None:
            raise ConfigError("dataset schema is only valid together with csv_path")
        if self.normalize is not None and self.normalize[1] <= 0:
            raise ConfigError("normalize sigma must be > 0")


def build_dataset(source: DatasetSource, seed: int) -> DatasetSplit:
    source.validate()
    if source.csv_path is not None:
        split = load_dataset(source.csv_path, source.schema)
    elif source.preset is not None:
        split = generate_synthetic(get_preset(source.preset), seed)
    else:
        split = generate_synthetic(source.synthetic, seed)
    if source.normalize is not None:
        split = normalize_features(split, *source.normalize)
    return split


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: a strategy/init pair run for several seeded trials."""

    dataset: DatasetSource
    learner: learner.LearnerConfig = field(default_factory=learner.LearnerConfig)
    strategy: str = "random"
    init_mode: str = "random"
    init_size: int = 128
    batch_size: int = 128
    rounds: int = 20
    trials: int = 5
    base_seed: int = 0
    output_dir: str | None = None

    def validate(self) -> None:
        self.dataset.validate()
        self.learner.validate()
        if self.strategy not in patients.STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}; expected one of {patients.STRATEGIES}")
        if self.init_mode not in patients.INIT_MODES:
            raise ConfigError(f"init_mode must be one of {patients.INIT_MODES}, got {self.init_mode!r}")
        if self.init_size < 1:
            raise ConfigError("init_size must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.rounds < 0:
            raise ConfigError("rounds must be >= 0")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.base_seed < 0:
            raise ConfigError("base_seed must be >= 0")


@dataclass(frozen=True)
class RoundRecord:
    """Per-round outcome of one trial; round 0 is the post-init evaluation.

    ``relaxed_count`` belongs to the batch that brought the labeled set to
    this round's size (the initialization batch for round 0).
    """

    trial_seed: int
    round_index: int
    train_size: int
    test_accuracy: float
    epochs_used: int
    relaxed_count: int


@dataclass(frozen=True)
class LearningCurve:
    """Per-round mean/std/stderr of test accuracy across trials."""

    train_sizes: tuple[int, ...]
    mean_accuracy: tuple[float, ...]
    std_accuracy: tuple[float, ...]
    stderr_accuracy: tuple[float, ...]
    trials: int

    def __len__(self) -> int:
        return len(self.train_sizes)


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    records: tuple[RoundRecord, ...]
    curve: LearningCurve


def run_trial(cfg: ExperimentConfig, trial_seed: int, dataset: DatasetSplit | None = None,
              on_batch=None) -> list[RoundRecord]:
    """Run one trial; returns rounds + 1 records.

    ``on_batch(stage, round_index, batch)`` is called for the init batch
    (stage "init") and every query batch (stage "query"), which lets callers
    audit selections without re-running them.
    """
    cfg.validate()
    split = dataset if dataset is not None else build_dataset(cfg.dataset, cfg.base_seed)
    pool = split.pool
    budget = cfg.init_size + cfg.rounds * cfg.batch_size
    if budget > len(pool):
        raise ConfigError(
            f"label budget {budget} (init {cfg.init_size} + {cfg.rounds} rounds x {cfg.batch_size}) "
            f"exceeds pool size {len(pool)}"
        )

    init_seed = derive_seed(trial_seed, 0, _INIT_STREAM)
    if cfg.init_mode == "decal":
        batch = patients.decal_initialize(pool, cfg.init_size, init_seed)
    else:
        batch = patients.random_initialize(pool, cfg.init_size, init_seed)
    remaining = set(int(i) for i in pool.ids)
    _check_batch(batch, cfg.init_size, remaining, pool, constrained=cfg.init_mode == "decal")
    if on_batch is not None:
        on_batch("init", 0, batch)

    labeled = LabeledSet(pool)
    labeled.extend(batch.members)
    remaining -= set(batch.members)
    pending_relaxed = batch.relaxed_count

    records: list[RoundRecord] = []
    for round_index in range(cfg.rounds + 1):
        expected = cfg.init_size + round_index * cfg.batch_size
        if len(labeled) != expected or len(remaining) != len(pool) - expected:
            raise InvariantViolation(
                f"budget bookkeeping broken at round {round_index}: "
                f"labeled {len(labeled)}, remaining {len(remaining)}, expected train size {expected}"
            )
        if remaining & set(labeled.ids):
            raise InvariantViolation("labeled set overlaps the remaining pool")

        model = learner.init_model(
            cfg.learner, split.feature_dim, split.num_classes,
            derive_seed(trial_seed, round_index, _MODEL_STREAM),
        )
        outcome = learner.train_round(
            model,
            labeled.features(),
            labeled.labels(),
            cfg.learner,
            derive_seed(trial_seed, round_index, _TRAIN_STREAM),
        )
        if not outcome.reached_target:
            log.warning(
                "trial %d round %d: epoch cap %d reached at train accuracy %.4f (target %.4f)",
                trial_seed, round_index, cfg.learner.max_epochs,
                outcome.train_accuracy, cfg.learner.train_accuracy_target,
            )
        accuracy = learner.evaluate(model, split.test.features, split.test.labels)
        records.append(RoundRecord(
            trial_seed=trial_seed,
            round_index=round_index,
            train_size=len(labeled),
            test_accuracy=accuracy,
            epochs_used=outcome.epochs_used,
            relaxed_count=pending_relaxed,
        ))

        if round_index < cfg.rounds:
            batch = patients.select_query_batch(
                cfg.strategy, model, pool, sorted(remaining), cfg.batch_size,
                derive_seed(trial_seed, round_index, _QUERY_STREAM),
            )
            _check_batch(batch, cfg.batch_size, remaining, pool,
                         constrained=cfg.strategy.startswith(patients.DECAL_PREFIX))
            if on_batch is not None:
                on_batch("query", round_index, batch)
            labeled.extend(batch.members)
            remaining -= set(batch.members)
            pending_relaxed = batch.relaxed_count

    return records


def _check_batch(batch: patients.QueryBatch, k: int, remaining: set[int], pool,
                 constrained: bool) -> None:
    """Re-check batch contracts instead of trusting the selection module."""
    members = batch.members
    if len(members) != k:
        raise InvariantViolation(f"batch has {len(members)} members, expected {k}")
    if len(set(members)) != len(members):
        raise InvariantViolation("batch contains duplicate sample ids")
    if not set(members) <= remaining:
        raise InvariantViolation("batch selected ids outside the remaining pool")
    if batch.relaxed_count < 0 or batch.relaxed_count > k:
        raise InvariantViolation(f"relaxed_count {batch.relaxed_count} out of range")
    if constrained and batch.relaxed_count == 0:
        batch_patients = pool.patients_for(members)
        if len(set(batch_patients)) != len(members):
            raise InvariantViolation("unique-patient batch repeats a patient")


def _trial_worker(args: tuple[ExperimentConfig, int]) -> list[RoundRecord]:
    cfg, trial_seed = args
    return run_trial(cfg, trial_seed)


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    """Run cfg.trials trials with seeds base_seed..base_seed+trials-1.

    With workers > 1 trials run in separate processes; records are always
    assembled in trial-seed order, so the output is scheduling-independent.
    """
    cfg.validate()
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    seeds = list(range(cfg.base_seed, cfg.base_seed + cfg.trials))
    if workers > 1 and cfg.trials > 1:
        with ProcessPoolExecutor(max_workers=min(workers, cfg.trials)) as executor:
            per_trial = list(executor.map(_trial_worker, [(cfg, s) for s in seeds]))
    else:
        dataset = build_dataset(cfg.dataset, cfg.base_seed)
        per_trial = [run_trial(cfg, s, dataset=dataset) for s in seeds]
    records = tuple(record for trial in per_trial for record in trial)
    return ExperimentResult(config=cfg, records=records, curve=aggregate_curve(records))


def aggregate_curve(records) -> LearningCurve:
    """Aggregate per-trial records into mean, sample std, and standard error.

    A single trial yields std 0 by convention (no divisor-by-zero surprises);
    otherwise std uses the n-1 divisor and stderr = std / sqrt(trials).
    """
    if not records:
        raise ValueError("no records to aggregate")
    by_trial: dict[int, list[RoundRecord]] = {}
    for record in records:
        by_trial.setdefault(record.trial_seed, []).append(record)
    trials = sorted(by_trial)
    shapes = set()
    for seed in trials:
        by_trial[seed].sort(key=lambda r: r.round_index)
        shapes.add(tuple((r.round_index, r.train_size) for r in by_trial[seed]))
    if len(shapes) != 1:
        raise ValueError("trials disagree on round structure; cannot aggregate")
    structure = shapes.pop()

    accuracy = np.array([[r.test_accuracy for r in by_trial[seed]] for seed in trials])
    n = len(trials)
    mean = accuracy.mean(axis=0)
    std = accuracy.std(axis=0, ddof=1) if n > 1 else np.zeros(accuracy.shape[1])
    stderr = std / np.sqrt(n)
    return LearningCurve(
        train_sizes=tuple(size for _, size in structure),
        mean_accuracy=tuple(float(v) for v in mean),
        std_accuracy=tuple(float(v) for v in std),
        stderr_accuracy=tuple(float(v) for v in stderr),
        trials=n,
    )


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def earliest_round_above_chance(curve: LearningCurve, num_classes: int) -> int | None:
    """Smallest round whose mean accuracy strictly exceeds 1/num_classes."""
    if num_classes < 2:
        raise ValueError("num_classes must be >= 2")
    chance = 1.0 / num_classes
    for round_index, mean in enumerate(curve.mean_accuracy):
        if mean > chance:
            return round_index
    return None


def percent_change(treatment: float, baseline: float) -> float:
    """Signed percentage change of treatment relative to baseline."""
    if baseline <= 0:
        raise ValueError(f"baseline must be > 0, got {baseline}")
    return (treatment - baseline) / baseline * 100.0


def percent_change_variants(treatments, baselines) -> dict[str, float]:
    """Two labeled ways to aggregate relative gains over paired results.

    "mean_of_percent_changes" averages the per-pair percent changes;
    "percent_change_of_means" compares the pooled means. The two generally
    differ, so both are reported and callers pick one explicitly.
    """
    treatments = [float(t) for t in treatments]
    baselines = [float(b) for b in baselines]
    if len(treatments) != len(baselines) or not treatments:
        raise ValueError("treatments and baselines must be equal-length and non-empty")
    per_pair = [percent_change(t, b) for t, b in zip(treatments, baselines)]
    return {
        "mean_of_percent_changes": float(np.mean(per_pair)),
        "percent_change_of_means": percent_change(float(np.mean(treatments)), float(np.mean(baselines))),
    }


@dataclass(frozen=True)
class InitComparison:
    """Side-by-side result of two experiments that differ only in init_mode."""

    round_index: int
    strategy: str
    treatment_mode: str
    baseline_mode: str
    treatment_mean: float
    treatment_std: float
    treatment_stderr: float
    baseline_mean: float
    baseline_std: float
    baseline_stderr: float
    percent_change: float
    variants: dict[str, float]
    treatment_result: ExperimentResult
    baseline_result: ExperimentResult


def compare_initializations(cfg_a: ExperimentConfig, cfg_b: ExperimentConfig,
                            round_index: int, workers: int = 1) -> InitComparison:
    """Run both configs and compare accuracy at one round.

    The configs must be identical apart from init_mode (output_dir is
    ignored). The config with init_mode "decal" is reported as the
    treatment; with equal modes, cfg_a is the treatment.
    """
    key_a = replace(cfg_a, init_mode="random", output_dir=None)
    key_b = replace(cfg_b, init_mode="random", output_dir=None)
    if key_a != key_b:
        raise ConfigError("configs must be identical except for init_mode")
    if not 0 <= round_index <= cfg_a.rounds:
        raise ConfigError(f"round {round_index} outside 0..{cfg_a.rounds}")

    if cfg_b.init_mode == "decal" and cfg_a.init_mode != "decal":
        treatment_cfg, baseline_cfg = cfg_b, cfg_a
    else:
        treatment_cfg, baseline_cfg = cfg_a, cfg_b

    treatment = run_experiment(treatment_cfg, workers=workers)
    baseline = run_experiment(baseline_cfg, workers=workers)
    t_mean = treatment.curve.mean_accuracy[round_index]
    b_mean = baseline.curve.mean_accuracy[round_index]
    return InitComparison(
        round_index=round_index,
        strategy=cfg_a.strategy,
        treatment_mode=treatment_cfg.init_mode,
        baseline_mode=baseline_cfg.init_mode,
        treatment_mean=t_mean,
        treatment_std=treatment.curve.std_accuracy[round_index],
        treatment_stderr=treatment.curve.stderr_accuracy[round_index],
        baseline_mean=b_mean,
        baseline_std=baseline.curve.std_accuracy[round_index],
        baseline_stderr=baseline.curve.stderr_accuracy[round_index],
        percent_change=percent_change(t_mean, b_mean),
        variants=percent_change_variants([t_mean], [b_mean]),
        treatment_result=treatment,
        baseline_result=baseline,
    )
