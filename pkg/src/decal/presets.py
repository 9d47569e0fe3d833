"""Named synthetic dataset presets for the CLI and the test harness."""

from __future__ import annotations

from dataclasses import replace

from .data import ImageCountSpec, SyntheticConfig
from .errors import ConfigError

_SKEWED = SyntheticConfig(
    num_classes=3,
    num_patients=60,
    images_per_patient=ImageCountSpec(kind="heavy_tailed", low=2, high=40, skew=1.6),
    feature_dim=8,
    class_separation=4.0,
    patient_offset_scale=1.2,
    test_fraction_of_patients=0.25,
    noise_scale=0.05,
)

PRESETS: dict[str, SyntheticConfig] = {
    # Few patients, heavy-tailed image counts, patient offsets dominate noise:
    # the setting where patient-diverse selection should pay off.
    "skewed": _SKEWED,
    # Same shape with zero patient offsets: patient identity carries no signal.
    "skewed-control": replace(_SKEWED, patient_offset_scale=0.0),
    # Many patients with uniform image counts; large enough for full
    # 128-per-round runs (480 pool patients x 8 images = 3840 pool samples).
    "large-uniform": SyntheticConfig(
        num_classes=3,
        num_patients=600,
        images_per_patient=ImageCountSpec(kind="uniform", low=8, high=8),
        feature_dim=6,
        class_separation=3.0,
        patient_offset_scale=0.5,
        test_fraction_of_patients=0.2,
        noise_scale=0.3,
    ),
}


def get_preset(name: str) -> SyntheticConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; available: {sorted(PRESETS)}") from None
