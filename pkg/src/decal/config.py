"""JSON config files with sections ``dataset``, ``learner``, ``experiment``.

Parsing is strict: unknown keys anywhere are errors, so typos fail fast
instead of silently running a default.
"""

from __future__ import annotations

import json
from typing import Any, Mapping

from .data import CsvSchema, ImageCountSpec, SyntheticConfig
from .errors import ConfigError
from .experiment import DatasetSource, ExperimentConfig
from .learner import LearnerConfig


def _require_mapping(value: Any, section: str) -> dict:
    if not isinstance(value, Mapping):
        raise ConfigError(f"section {section!r} must be a JSON object")
    return dict(value)


def _check_keys(mapping: Mapping[str, Any], allowed: set[str], section: str) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {section}: {sorted(unknown)}")


def _parse_images_per_patient(value: Any) -> ImageCountSpec:
    entry = _require_mapping(value, "dataset.synthetic.images_per_patient")
    _check_keys(entry, {"kind", "low", "high", "skew"}, "dataset.synthetic.images_per_patient")
    return ImageCountSpec(
        kind=str(entry.get("kind", "uniform")),
        low=int(entry.get("low", 1)),
        high=int(entry.get("high", entry.get("low", 1))),
        skew=float(entry.get("skew", 2.0)),
    )


def parse_synthetic(value: Any, section: str = "dataset.synthetic") -> SyntheticConfig:
    entry = _require_mapping(value, section)
    required = {
        "num_classes", "num_patients", "images_per_patient", "feature_dim",
        "class_separation", "patient_offset_scale", "test_fraction_of_patients",
        "noise_scale",
    }
    _check_keys(entry, required, section)
    missing = required - set(entry)
    if missing:
        raise ConfigError(f"missing keys in {section}: {sorted(missing)}")
    return SyntheticConfig(
        num_classes=int(entry["num_classes"]),
        num_patients=int(entry["num_patients"]),
        images_per_patient=_parse_images_per_patient(entry["images_per_patient"]),
        feature_dim=int(entry["feature_dim"]),
        class_separation=float(entry["class_separation"]),
        patient_offset_scale=float(entry["patient_offset_scale"]),
        test_fraction_of_patients=float(entry["test_fraction_of_patients"]),
        noise_scale=float(entry["noise_scale"]),
    )


def _parse_dataset(value: Any) -> DatasetSource:
    section = _require_mapping(value, "dataset")
    _check_keys(section, {"csv_path", "schema", "synthetic", "preset", "normalize"}, "dataset")
    schema = None
    if "schema" in section:
        schema = CsvSchema.from_mapping(_require_mapping(section["schema"], "dataset.schema"))
    synthetic = None
    if "synthetic" in section:
        synthetic = parse_synthetic(section["synthetic"])
    normalize = None
    if "normalize" in section:
        norm = _require_mapping(section["normalize"], "dataset.normalize")
        _check_keys(norm, {"mu", "sigma"}, "dataset.normalize")
        if "mu" not in norm or "sigma" not in norm:
            raise ConfigError("dataset.normalize requires both mu and sigma")
        normalize = (float(norm["mu"]), float(norm["sigma"]))
    return DatasetSource(
        csv_path=str(section["csv_path"]) if "csv_path" in section else None,
        schema=schema,
        synthetic=synthetic,
        preset=str(section["preset"]) if "preset" in section else None,
        normalize=normalize,
    )


def _parse_learner(value: Any) -> LearnerConfig:
    section = _require_mapping(value, "learner")
    allowed = {"hidden_width", "learning_rate", "train_accuracy_target", "max_epochs", "minibatch_size"}
    _check_keys(section, allowed, "learner")
    defaults = LearnerConfig()
    return LearnerConfig(
        hidden_width=int(section.get("hidden_width", defaults.hidden_width)),
        learning_rate=float(section.get("learning_rate", defaults.learning_rate)),
        train_accuracy_target=float(section.get("train_accuracy_target", defaults.train_accuracy_target)),
        max_epochs=int(section.get("max_epochs", defaults.max_epochs)),
        minibatch_size=int(section.get("minibatch_size", defaults.minibatch_size)),
    )


def parse_config(mapping: Mapping[str, Any]) -> ExperimentConfig:
    root = _require_mapping(mapping, "config")
    _check_keys(root, {"dataset", "learner", "experiment"}, "config")
    if "dataset" not in root:
        raise ConfigError("config requires a 'dataset' section")
    dataset = _parse_dataset(root["dataset"])
    learner_cfg = _parse_learner(root.get("learner", {}))

    section = _require_mapping(root.get("experiment", {}), "experiment")
    allowed = {
        "strategy", "init_mode", "init_size", "batch_size", "rounds", "trials",
        "base_seed", "output_dir",
    }
    _check_keys(section, allowed, "experiment")
    cfg = ExperimentConfig(
        dataset=dataset,
        learner=learner_cfg,
        strategy=str(section.get("strategy", "random")),
        init_mode=str(section.get("init_mode", "random")),
        init_size=int(section.get("init_size", 128)),
        batch_size=int(section.get("batch_size", 128)),
        rounds=int(section.get("rounds", 20)),
        trials=int(section.get("trials", 5)),
        base_seed=int(section.get("base_seed", 0)),
        output_dir=str(section["output_dir"]) if "output_dir" in section else None,
    )
    cfg.validate()
    return cfg


def load_config_file(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from None
    return parse_config(raw)
