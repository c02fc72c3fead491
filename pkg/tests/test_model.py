import json

import numpy as np
import pytest

from utilicit.model import (
    ModelError,
    best_strategy,
    expected_utility,
    load_model,
    model_from_dict,
    save_model,
)
from utilicit.utility import UtilityFunction

from conftest import make_model, random_model, random_normalized_values
from oracles import brute_best_strategy, brute_expected_utility


class TestExpectedUtility:
    def test_worked_example(self, tri_model):
        u = UtilityFunction("u", [1.0, 0.9, 0.0])
        assert expected_utility(tri_model, u, 0, 0) == pytest.approx(0.95, abs=1e-12)

    def test_constant_utility_returns_constant(self, tri_model):
        u = UtilityFunction("c", [0.4, 0.4, 0.4])
        for s in range(tri_model.num_strategies):
            assert expected_utility(tri_model, u, s, 0) == pytest.approx(0.4, abs=1e-12)

    def test_indicator_of_best_anchor_returns_its_probability(self, tri_model):
        u = UtilityFunction("i", [1.0, 0.0, 0.0])
        assert expected_utility(tri_model, u, 0, 0) == pytest.approx(0.5, abs=1e-15)
        assert expected_utility(tri_model, u, 1, 0) == pytest.approx(0.8, abs=1e-15)

    def test_dimension_mismatch_rejected(self, tri_model):
        with pytest.raises(ModelError, match="entries"):
            expected_utility(tri_model, UtilityFunction("u", [1.0, 0.0]), 0, 0)

    def test_invalid_ids_rejected(self, tri_model):
        u = UtilityFunction("u", [1.0, 0.5, 0.0])
        with pytest.raises(ModelError):
            expected_utility(tri_model, u, 5, 0)
        with pytest.raises(ModelError):
            expected_utility(tri_model, u, 0, 3)

    def test_linear_in_utility(self, tri_model):
        rng = np.random.default_rng(11)
        for _ in range(200):
            u, v = rng.random(3), rng.random(3)
            a, b = rng.uniform(-2, 2, size=2)
            mix = expected_utility(tri_model, a * u + b * v, 1, 0)
            parts = a * expected_utility(tri_model, u, 1, 0) \
                + b * expected_utility(tri_model, v, 1, 0)
            assert mix == pytest.approx(parts, abs=1e-9)

    def test_linear_on_random_models(self):
        rng = np.random.default_rng(12)
        for _ in range(50):
            model = random_model(rng)
            u = rng.random(model.num_outcomes)
            v = rng.random(model.num_outcomes)
            a, b = rng.uniform(0, 3, size=2)
            s = int(rng.integers(model.num_strategies))
            h = int(rng.integers(model.num_histories))
            assert expected_utility(model, a * u + b * v, s, h) == pytest.approx(
                a * expected_utility(model, u, s, h) + b * expected_utility(model, v, s, h),
                abs=1e-9)


class TestBestStrategy:
    def test_worked_example(self, tri_model):
        s, eu = best_strategy(tri_model, UtilityFunction("u", [1.0, 0.9, 0.0]), 0)
        assert (s, eu) == (0, pytest.approx(0.95, abs=1e-12))

    def test_second_strategy_wins(self, tri_model):
        s, eu = best_strategy(tri_model, UtilityFunction("u", [1.0, 0.2, 0.0]), 0)
        assert s == 1
        assert eu == pytest.approx(0.8, abs=1e-12)

    def test_tie_broken_by_lowest_id(self, tri_model):
        s, eu = best_strategy(tri_model, UtilityFunction("c", [0.5, 0.5, 0.5]), 0)
        assert s == 0
        assert eu == pytest.approx(0.5, abs=1e-12)

    def test_returned_eu_matches_expected_utility(self, tri_model):
        rng = np.random.default_rng(13)
        for _ in range(100):
            u = rng.random(3)
            s, eu = best_strategy(tri_model, u, 0)
            assert eu == expected_utility(tri_model, u, s, 0)

    def test_affine_transform_keeps_argmax(self):
        rng = np.random.default_rng(14)
        for _ in range(200):
            model = random_model(rng)
            u = rng.random(model.num_outcomes)
            a = rng.uniform(0.1, 5.0)
            b = rng.uniform(-2.0, 2.0)
            for h in range(model.num_histories):
                assert best_strategy(model, u, h)[0] == best_strategy(model, a * u + b, h)[0]

    def test_agrees_with_brute_force_on_random_models(self):
        rng = np.random.default_rng(15)
        for _ in range(200):
            model = random_model(rng)
            u = random_normalized_values(rng, model.num_outcomes)
            for h in range(model.num_histories):
                s, eu = best_strategy(model, u, h)
                bs, beu = brute_best_strategy(model, u, h)
                assert s == bs
                assert eu == pytest.approx(beu, abs=1e-12)

    def test_agrees_with_brute_force_on_fixture(self, tri_model):
        rng = np.random.default_rng(16)
        for _ in range(300):
            u = rng.random(3)
            assert best_strategy(tri_model, u, 0)[0] == brute_best_strategy(tri_model, u, 0)[0]
            assert expected_utility(tri_model, u, 1, 0) == pytest.approx(
                brute_expected_utility(tri_model, u, 1, 0), abs=1e-12)


class TestLoadModel:
    def test_bundled_model_cardinalities(self, mini_model):
        assert mini_model.num_outcomes == 22
        assert mini_model.num_strategies == 18
        assert mini_model.num_histories == 4

    def test_bundled_model_rows_sum_to_one(self, mini_model):
        sums = mini_model.prob.sum(axis=2)
        assert np.allclose(sums, 1.0, atol=1e-12)

    def test_row_sum_violation_names_offender(self, tri_model, tmp_path):
        doc = tri_model.to_dict()
        doc["prob"][1][0] = [0.5, 0.2, 0.2]  # sums to 0.9
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(ModelError, match=r"strategy=1.*history=0"):
            load_model(path)

    def test_minimal_model_loads(self, tmp_path):
        doc = {
            "outcomes": [{"id": 0, "label": "good", "question_text": "good"},
                         {"id": 1, "label": "bad", "question_text": "bad"}],
            "histories": [{"id": 0, "label": "only", "prior": 1.0}],
            "strategies": [{"id": 0, "label": "a", "description": "a"},
                           {"id": 1, "label": "b", "description": "b"}],
            "prob": [[[0.9, 0.1]], [[0.6, 0.4]]],
            "best_anchor": 0,
            "worst_anchor": 1,
        }
        path = tmp_path / "min.json"
        path.write_text(json.dumps(doc))
        model = load_model(path)
        assert model.num_outcomes == 2
        assert best_strategy(model, np.array([1.0, 0.0]), 0)[0] == 0

    def test_bad_anchor_rejected(self, tri_model):
        doc = tri_model.to_dict()
        doc["worst_anchor"] = doc["best_anchor"]
        with pytest.raises(ModelError, match="anchor"):
            model_from_dict(doc)
        doc["worst_anchor"] = 99
        with pytest.raises(ModelError, match="anchor"):
            model_from_dict(doc)

    def test_parse_error(self, tmp_path):
        path = tmp_path / "garbage.json"
        path.write_text("{not json")
        with pytest.raises(ModelError, match="parse"):
            load_model(path)

    def test_negative_probability_rejected(self):
        with pytest.raises(ModelError, match="negative"):
            make_model([[[1.1, -0.1, 0.0]], [[0.5, 0.25, 0.25]]])

    def test_single_strategy_rejected(self):
        with pytest.raises(ModelError, match="at least 2 strategies"):
            make_model([[[0.5, 0.5, 0.0]]])

    def test_near_miss_rows_renormalized_exactly(self):
        row = np.array([0.3, 0.3, 0.4]) * (1 + 5e-10)
        model = make_model([[row.tolist()], [[0.2, 0.2, 0.6]]])
        assert model.prob[0, 0].sum() == pytest.approx(1.0, abs=1e-15)

    def test_round_trip_at_full_precision(self, mini_model, tmp_path):
        # decimal round-trip must preserve >= 15 significant digits; the
        # reload renormalizes rows, so equality is up to an ulp
        path = tmp_path / "again.json"
        save_model(mini_model, path)
        again = load_model(path)
        assert np.allclose(again.prob, mini_model.prob, rtol=1e-15, atol=1e-18)
        assert [s.label for s in again.strategies] == [s.label for s in mini_model.strategies]
