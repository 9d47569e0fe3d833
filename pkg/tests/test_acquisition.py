import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from decal.acquisition import (
    make_ranking,
    score_entropy,
    score_least_confidence,
    score_margin,
    select_badge,
    select_random,
    select_top_k,
)
from helpers import linear_model


def probability_vectors(min_classes=2, max_classes=6):
    return (
        st.integers(min_classes, max_classes)
        .flatmap(lambda c: st.lists(st.floats(1e-6, 1.0), min_size=c, max_size=c))
        .map(lambda raw: np.array(raw) / np.sum(raw))
    )


class TestScorers:
    def test_entropy_reference_values(self):
        assert score_entropy([1 / 3, 1 / 3, 1 / 3]) == pytest.approx(math.log(3), abs=1e-12)
        assert score_entropy([1.0, 0.0, 0.0]) == 0.0
        # frozen from a 60-digit evaluation of -sum p ln p
        assert score_entropy([0.5, 0.3, 0.2]) == pytest.approx(1.0296530140645735274, abs=1e-12)

    def test_margin_reference_values(self):
        assert score_margin([1.0, 0.0, 0.0]) == -1.0
        assert score_margin([1 / 3, 1 / 3, 1 / 3]) == pytest.approx(0.0, abs=1e-15)
        assert score_margin([0.5, 0.3, 0.2]) == pytest.approx(-0.2, abs=1e-15)

    def test_least_confidence_reference_values(self):
        assert score_least_confidence([1.0, 0.0, 0.0]) == 0.0
        assert score_least_confidence([1 / 3, 1 / 3, 1 / 3]) == pytest.approx(2 / 3, abs=1e-15)
        assert score_least_confidence([0.5, 0.3, 0.2]) == pytest.approx(0.5, abs=1e-15)

    @pytest.mark.parametrize("bad", [
        [0.5, 0.6],            # does not sum to 1
        [1.2, -0.2],           # outside [0, 1]
        [1.0],                 # fewer than 2 entries
        [np.nan, 1.0],         # non-finite
    ])
    def test_invalid_vectors_rejected(self, bad):
        for scorer in (score_entropy, score_margin, score_least_confidence):
            with pytest.raises(ValueError):
                scorer(bad)

    @given(probability_vectors())
    def test_entropy_bounds(self, p):
        value = score_entropy(p)
        assert -1e-12 <= value <= math.log(len(p)) + 1e-12

    @given(probability_vectors(), st.floats(0.0, 1.0))
    @settings(max_examples=200)
    def test_moving_mass_off_argmax_never_decreases_scores(self, p, fraction):
        top = int(np.argmax(p))
        order = np.argsort(-p)
        runner_up = int(order[1]) if order[0] == top else int(order[0])
        epsilon = fraction * (p[top] - p[runner_up]) / 2
        q = p.copy()
        q[top] -= epsilon
        q[runner_up] += epsilon
        tolerance = 1e-9
        assert score_entropy(q) >= score_entropy(p) - tolerance
        assert score_margin(q) >= score_margin(p) - tolerance
        assert score_least_confidence(q) >= score_least_confidence(p) - tolerance


class TestSelectTopK:
    def test_basic(self):
        assert select_top_k({1: 0.9, 2: 0.1, 3: 0.5}, 2) == [1, 3]

    def test_tie_breaks_to_lower_id(self):
        assert select_top_k({7: 0.5, 3: 0.5}, 1) == [3]

    def test_full_ordering(self):
        assert select_top_k({1: 0.2, 2: 0.9, 3: 0.2}, 3) == [2, 1, 3]

    def test_k_too_large(self):
        with pytest.raises(ValueError):
            select_top_k({1: 0.5}, 2)

    def test_duplicate_ids_rejected(self):
        with pytest.raises(ValueError):
            select_top_k([(1, 0.5), (1, 0.6)], 1)

    @given(
        st.lists(st.tuples(st.integers(0, 30), st.integers(0, 5)), min_size=1, max_size=30)
        .map(lambda pairs: {i: v / 5 for i, v in pairs}),
        st.data(),
    )
    @settings(max_examples=200)
    def test_matches_sort_oracle(self, scores, data):
        k = data.draw(st.integers(0, len(scores)))
        oracle = [i for i, _ in sorted(scores.items(), key=lambda iv: (-iv[1], iv[0]))][:k]
        assert select_top_k(scores, k) == oracle


class TestSelectRandom:
    def test_full_draw_is_permutation(self):
        out = select_random([5, 3, 9, 1], 4, seed=0)
        assert sorted(out) == [1, 3, 5, 9]

    def test_deterministic(self):
        assert select_random(range(50), 10, seed=4) == select_random(range(50), 10, seed=4)

    def test_uniform_frequencies(self):
        counts = {c: 0 for c in (0, 1, 2, 3)}
        for seed in range(10000):
            counts[select_random([0, 1, 2, 3], 1, seed)[0]] += 1
        for c in counts:
            assert abs(counts[c] / 10000 - 0.25) < 0.02

    def test_k_too_large(self):
        with pytest.raises(ValueError):
            select_random([1, 2], 3, seed=0)


class TestSelectBadge:
    def test_k1_returns_max_norm(self):
        embeddings = {10: np.array([0.1, 0.0]), 11: np.array([3.0, 4.0]), 12: np.array([1.0, 1.0])}
        assert select_badge(embeddings, 1, seed=0) == [11]

    def test_k1_norm_tie_breaks_to_lower_id(self):
        embeddings = {4: np.array([0.0, 2.0]), 2: np.array([2.0, 0.0])}
        assert select_badge(embeddings, 1, seed=0) == [2]

    def test_two_point_mass_clusters(self):
        embeddings = {}
        for i in range(5):
            embeddings[i] = np.array([10.0, 0.0])
        for i in range(5, 10):
            embeddings[i] = np.array([0.0, 5.0])
        for seed in range(25):
            picked = select_badge(embeddings, 2, seed=seed)
            assert {0 <= p < 5 for p in picked} == {True, False}

    def test_k_equals_all(self):
        rng = np.random.default_rng(0)
        embeddings = {i: rng.standard_normal(3) for i in range(12)}
        out = select_badge(embeddings, 12, seed=1)
        assert sorted(out) == list(range(12))

    def test_deterministic_and_distinct(self):
        rng = np.random.default_rng(5)
        embeddings = {i: rng.standard_normal(4) for i in range(40)}
        a = select_badge(embeddings, 10, seed=9)
        b = select_badge(embeddings, 10, seed=9)
        assert a == b
        assert len(set(a)) == 10
        assert set(a) <= set(embeddings)

    def test_all_identical_falls_back_to_lowest_ids(self):
        embeddings = {i: np.array([1.0, 1.0]) for i in (7, 3, 5)}
        assert select_badge(embeddings, 3, seed=0) == [3, 5, 7]

    def test_k_too_large(self):
        with pytest.raises(ValueError):
            select_badge({1: np.array([1.0])}, 2, seed=0)


class TestMakeRanking:
    def test_entropy_composition(self):
        # posteriors: uniform, (0.5, 0.3, 0.2), near-one-hot
        model = linear_model(np.eye(3), np.zeros(3))
        ids = [100, 200, 300]
        features = np.array([
            [0.0, 0.0, 0.0],
            np.log([0.5, 0.3, 0.2]),
            [50.0, 0.0, 0.0],
        ])
        assert make_ranking("entropy", model, ids, features, 3, seed=0) == [100, 200, 300]

    def test_score_strategies_return_full_ranking(self):
        model = linear_model(np.eye(3), np.zeros(3))
        ids = [1, 2, 3, 4]
        rng = np.random.default_rng(0)
        features = rng.standard_normal((4, 3))
        for strategy in ("entropy", "margin", "least_confidence"):
            ranking = make_ranking(strategy, model, ids, features, 1, seed=0)
            assert sorted(ranking) == ids

    def test_random_permutation(self):
        model = linear_model(np.eye(2), np.zeros(2))
        out = make_ranking("random", model, [4, 5, 6], np.zeros((3, 2)), 3, seed=2)
        assert sorted(out) == [4, 5, 6]

    def test_badge_k1_is_max_norm_sample(self):
        model = linear_model(np.eye(3), np.zeros(3))
        # the uniform-posterior sample has the largest residual; scale features
        # so penultimate norms dominate
        ids = [1, 2]
        features = np.array([[0.0, 0.0, 0.0], [50.0, 0.0, 0.0]])
        embeddings_norms = {}
        from decal.learner import gradient_embedding
        for i, x in zip(ids, features):
            embeddings_norms[i] = np.linalg.norm(gradient_embedding(model, x))
        expected = max(ids, key=lambda i: embeddings_norms[i])
        assert make_ranking("badge", model, ids, features, 1, seed=0) == [expected]

    def test_unknown_strategy(self):
        model = linear_model(np.eye(2), np.zeros(2))
        with pytest.raises(ValueError):
            make_ranking("coreset", model, [1], np.zeros((1, 2)), 1, seed=0)
