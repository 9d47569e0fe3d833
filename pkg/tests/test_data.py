import numpy as np
import pytest

from decal.data import (
    CsvSchema,
    DatasetSplit,
    ImageCountSpec,
    LabeledSet,
    SyntheticConfig,
    generate_synthetic,
    load_dataset,
    normalize_features,
    patient_distribution,
    reveal_label,
    write_dataset,
)
from decal.errors import (
    ConfigError,
    CsvParseError,
    DataError,
    FeatureDimensionError,
    PatientOverlapError,
)
from helpers import make_sampleset, make_split, split_equal

BASIC_CSV = """sample_id,patient_id,label,split,f0,f1
0,A,0,pool,0.1,0.2
1,A,1,pool,0.3,0.4
2,B,0,pool,0.5,0.6
3,B,1,pool,0.7,0.8
4,C,0,test,0.9,1.0
5,C,1,test,1.1,1.2
"""


def write_csv(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadDataset:
    def test_basic_read_back(self, tmp_path):
        split = load_dataset(write_csv(tmp_path, BASIC_CSV))
        assert len(split.pool) == 4
        assert len(split.test) == 2
        assert split.feature_dim == 2
        assert split.num_classes == 2
        assert set(split.pool.patients) == {"A", "B"}
        assert set(split.test.patients) == {"C"}
        assert reveal_label(split.pool, 1) == 1
        np.testing.assert_array_equal(split.pool.features_for([0]), [[0.1, 0.2]])

    def test_patient_in_both_splits_rejected(self, tmp_path):
        text = BASIC_CSV.replace("4,C,0,test", "4,A,0,test")
        with pytest.raises(PatientOverlapError) as err:
            load_dataset(write_csv(tmp_path, text))
        assert "'A'" in str(err.value)

    def test_extra_feature_is_dimension_error_with_line(self, tmp_path):
        text = BASIC_CSV.replace("2,B,0,pool,0.5,0.6", "2,B,0,pool,0.5,0.6,0.7")
        with pytest.raises(FeatureDimensionError) as err:
            load_dataset(write_csv(tmp_path, text))
        assert ":4:" in str(err.value)

    def test_malformed_row_has_line_number(self, tmp_path):
        text = BASIC_CSV.replace("3,B,1,pool", "3,B,notalabel,pool")
        with pytest.raises(CsvParseError) as err:
            load_dataset(write_csv(tmp_path, text))
        assert err.value.line_number == 5

    def test_short_row_is_parse_error(self, tmp_path):
        text = BASIC_CSV.replace("1,A,1,pool,0.3,0.4", "1,A,1,pool,0.3")
        with pytest.raises(CsvParseError) as err:
            load_dataset(write_csv(tmp_path, text))
        assert err.value.line_number == 3

    def test_bad_split_value(self, tmp_path):
        text = BASIC_CSV.replace("0,A,0,pool", "0,A,0,train")
        with pytest.raises(CsvParseError):
            load_dataset(write_csv(tmp_path, text))

    def test_duplicate_sample_id(self, tmp_path):
        text = BASIC_CSV.replace("1,A,1,pool", "0,A,1,pool")
        with pytest.raises(CsvParseError) as err:
            load_dataset(write_csv(tmp_path, text))
        assert "duplicate" in str(err.value)

    def test_unexpected_column_rejected(self, tmp_path):
        text = BASIC_CSV.replace("split,f0", "split,extra,f0").replace(
            "pool,0.1", "pool,x,0.1"
        )
        with pytest.raises(CsvParseError):
            load_dataset(write_csv(tmp_path, text))

    def test_missing_required_column(self, tmp_path):
        text = BASIC_CSV.replace("patient_id", "who")
        with pytest.raises(CsvParseError):
            load_dataset(write_csv(tmp_path, text))

    def test_non_finite_feature_rejected(self, tmp_path):
        text = BASIC_CSV.replace("0.5,0.6", "nan,0.6")
        with pytest.raises(CsvParseError):
            load_dataset(write_csv(tmp_path, text))

    def test_empty_test_split_rejected(self, tmp_path):
        text = "\n".join(BASIC_CSV.splitlines()[:5]) + "\n"
        with pytest.raises(DataError):
            load_dataset(write_csv(tmp_path, text))

    def test_schema_remapping(self, tmp_path):
        text = BASIC_CSV.replace("sample_id,patient_id", "sid,subject")
        schema = CsvSchema(sample_id="sid", patient_id="subject")
        split = load_dataset(write_csv(tmp_path, text), schema)
        assert len(split.pool) == 4

    def test_round_trip(self, tmp_path):
        split = load_dataset(write_csv(tmp_path, BASIC_CSV))
        out = tmp_path / "again.csv"
        write_dataset(split, out)
        reloaded = load_dataset(out)
        assert split_equal(split, reloaded)
        # a second serialization is byte-identical
        out2 = tmp_path / "third.csv"
        write_dataset(reloaded, out2)
        assert out.read_bytes() == out2.read_bytes()


def synth_cfg(**overrides):
    base = dict(
        num_classes=3,
        num_patients=30,
        images_per_patient=ImageCountSpec(kind="uniform", low=5, high=5),
        feature_dim=4,
        class_separation=3.0,
        patient_offset_scale=1.0,
        test_fraction_of_patients=0.2,
        noise_scale=0.2,
    )
    base.update(overrides)
    return SyntheticConfig(**base)


class TestGenerateSynthetic:
    def test_patient_counts_follow_config(self):
        split = generate_synthetic(synth_cfg(), seed=3)
        assert len(set(split.pool.patients)) == 24
        assert len(set(split.test.patients)) == 6
        assert len(split.pool) == 24 * 5
        assert len(split.test) == 6 * 5
        assert not set(split.pool.patients) & set(split.test.patients)

    def test_deterministic_in_seed(self):
        a = generate_synthetic(synth_cfg(), seed=11)
        b = generate_synthetic(synth_cfg(), seed=11)
        assert split_equal(a, b)
        c = generate_synthetic(synth_cfg(), seed=12)
        assert not np.array_equal(a.pool.features, c.pool.features)

    def test_zero_offset_removes_patient_structure(self):
        split = generate_synthetic(
            synth_cfg(patient_offset_scale=0.0, noise_scale=0.05), seed=5
        )
        # with no offsets every sample of a class sits near one common mean
        for part in (split.pool, split.test):
            for c in range(split.num_classes):
                rows = part.features[part.labels == c]
                centered = rows - rows.mean(axis=0)
                assert np.linalg.norm(centered, axis=1).max() < 8 * 0.05 * np.sqrt(4)

    def test_heavy_tailed_counts_vary(self):
        cfg = synth_cfg(
            images_per_patient=ImageCountSpec(kind="heavy_tailed", low=2, high=40, skew=1.6),
            num_patients=60,
        )
        split = generate_synthetic(cfg, seed=9)
        counts = list(patient_distribution(split.pool).values())
        assert min(counts) >= 2 and max(counts) <= 40
        assert max(counts) > min(counts)

    def test_too_few_patients_rejected(self):
        with pytest.raises(ConfigError):
            generate_synthetic(synth_cfg(num_patients=2), seed=0)

    def test_invalid_fraction_rejected(self):
        with pytest.raises(ConfigError):
            generate_synthetic(synth_cfg(test_fraction_of_patients=1.0), seed=0)

    def test_round_trips_through_csv(self, tmp_path):
        split = generate_synthetic(synth_cfg(), seed=21)
        path = tmp_path / "synth.csv"
        write_dataset(split, path)
        assert split_equal(split, load_dataset(path))


class TestPatientDistribution:
    def test_counts(self):
        pool = make_sampleset([
            (0, "A", [0.0], 0), (1, "A", [0.0], 1), (2, "B", [0.0], 0),
        ])
        assert patient_distribution(pool) == {"A": 2, "B": 1}

    def test_empty_iterable(self):
        assert patient_distribution([]) == {}

    def test_single_patient_bulk(self):
        pool = make_sampleset([(i, "A", [0.0], 0) for i in range(1000)])
        assert patient_distribution(pool) == {"A": 1000}

    def test_counts_sum_to_pool_size(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            n = int(rng.integers(1, 50))
            rows = [(i, f"p{rng.integers(8)}", [0.0], 0) for i in range(n)]
            pool = make_sampleset(rows)
            assert sum(patient_distribution(pool).values()) == n


class TestOracle:
    def test_reveal_and_idempotence(self):
        split = make_split(
            [(0, "A", [0.0, 0.0], 2), (1, "B", [1.0, 1.0], 0)],
            [(2, "C", [2.0, 2.0], 1)],
        )
        assert reveal_label(split.pool, 0) == 2
        assert reveal_label(split.pool, 0) == 2

    def test_test_ids_not_served(self):
        split = make_split(
            [(0, "A", [0.0], 0), (1, "B", [1.0], 1)],
            [(2, "C", [2.0], 1)],
        )
        with pytest.raises(KeyError):
            reveal_label(split.pool, 2)


class TestLabeledSet:
    def fixture_split(self):
        return make_split(
            [(0, "A", [0.0, 1.0], 2), (1, "B", [1.0, 0.0], 0), (2, "B", [2.0, 2.0], 1)],
            [(3, "C", [3.0, 3.0], 1)],
        )

    def test_grows_in_order_with_revealed_labels(self):
        split = self.fixture_split()
        labeled = LabeledSet(split.pool)
        labeled.extend([2, 0])
        assert labeled.ids == [2, 0]
        assert list(labeled.labels()) == [1, 2]
        np.testing.assert_array_equal(labeled.features(), [[2.0, 2.0], [0.0, 1.0]])
        labeled.extend([1])
        assert len(labeled) == 3 and 1 in labeled

    def test_rejects_duplicates(self):
        split = self.fixture_split()
        labeled = LabeledSet(split.pool)
        labeled.extend([0])
        with pytest.raises(ValueError):
            labeled.extend([0])
        assert len(labeled) == 1

    def test_rejects_non_pool_ids(self):
        split = self.fixture_split()
        labeled = LabeledSet(split.pool)
        with pytest.raises(KeyError):
            labeled.extend([3])  # test-split id: the oracle only serves the pool


class TestNormalizeFeatures:
    def test_identity(self):
        split = generate_synthetic(synth_cfg(), seed=2)
        same = normalize_features(split, 0.0, 1.0)
        assert np.array_equal(same.pool.features, split.pool.features)
        assert np.array_equal(same.test.features, split.test.features)

    def test_constant_maps_to_zero(self):
        split = make_split(
            [(0, "A", [0.5, 0.5], 0), (1, "B", [0.5, 0.5], 1)],
            [(2, "C", [0.5, 0.5], 0)],
        )
        normalized = normalize_features(split, 0.5, 2.0)
        assert np.all(normalized.pool.features == 0.0)

    def test_reference_constants(self):
        # (0.2773 - 0.1987) / 0.0786 = 1 exactly in real arithmetic
        split = make_split(
            [(0, "A", [0.2773], 0), (1, "B", [0.2773], 1)],
            [(2, "C", [0.2773], 0)],
        )
        normalized = normalize_features(split, 0.1987, 0.0786)
        assert abs(normalized.pool.features[0, 0] - 1.0) < 1e-12

    def test_invalid_sigma(self):
        split = generate_synthetic(synth_cfg(), seed=2)
        with pytest.raises(ConfigError):
            normalize_features(split, 0.0, 0.0)


class TestSplitInvariants:
    def test_shared_sample_id_rejected(self):
        with pytest.raises(DataError):
            make_split(
                [(0, "A", [0.0], 0), (1, "B", [1.0], 1)],
                [(0, "C", [2.0], 1)],
            )

    def test_label_out_of_range_rejected(self):
        with pytest.raises(DataError):
            DatasetSplit(
                pool=make_sampleset([(0, "A", [0.0], 5), (1, "B", [1.0], 0)]),
                test=make_sampleset([(2, "C", [0.0], 0)]),
                num_classes=2,
                feature_dim=1,
            )

    def test_sampleset_rejects_duplicates_and_nan(self):
        with pytest.raises(DataError):
            make_sampleset([(0, "A", [0.0], 0), (0, "B", [1.0], 0)])
        with pytest.raises(DataError):
            make_sampleset([(0, "A", [np.nan], 0)])
