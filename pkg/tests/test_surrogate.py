import numpy as np
import pytest

from oracles import grid_search_temperature, reference_ks, reference_w1
from shiftcal.core import PredictionSet, model_probs, model_temperature, softmax
from shiftcal.scaling import TemperatureFit, fit_temperature
from shiftcal.surrogate import (
    LadderSet,
    SurrogateLadder,
    build_ladder,
    dist_ks,
    dist_mean,
    dist_w1,
    sac_select,
    select_by_mean,
    sts_fit,
)
from test_scaling import calibrated_set


def pmax_set(pmax_values, seed=None):
    """Two-class prediction set whose vanilla pmax values equal the input."""
    p = np.asarray(pmax_values, dtype=float)
    assert ((p > 0.5) & (p < 1.0)).all()
    logits = np.stack([np.log(p / (1 - p)), np.zeros_like(p)], axis=1)
    return PredictionSet(logits, np.zeros(len(p), dtype=int))


def summary_ladder(means):
    """Ladder with prescribed mean confidences; temperatures are dummies."""
    dummy = calibrated_set(1.0, 4, 2, seed=0)
    fit = TemperatureFit(1.0, 0.0, "nll", 1)
    return SurrogateLadder(
        sets=tuple(
            LadderSet(tag=f"s{j}", preds=dummy, temperature=fit, mean_pmax=float(m))
            for j, m in enumerate(means)
        )
    )


class TestBuildLadder:
    def test_single_set_degenerates_to_ts(self):
        cal = calibrated_set(2.0, 400, 3, seed=1)
        ladder = build_ladder([("clean", cal)])
        assert ladder.size == 1
        assert ladder.sets[0].temperature == fit_temperature(cal)
        model = sac_select(ladder, cal)
        assert model.selected == 1
        assert model_temperature(model) == fit_temperature(cal).temperature

    def test_mean_pmax_recomputable(self):
        cal = calibrated_set(2.0, 300, 3, seed=2)
        ladder = build_ladder([("clean", cal)])
        expected = float(softmax(cal.logits).max(axis=1).mean())
        assert ladder.sets[0].mean_pmax == pytest.approx(expected, abs=1e-12)

    def test_progressive_degradation_orders_means(self):
        # Degrade by flattening logits: harsher sets are less confident.
        base = calibrated_set(1.0, 400, 4, seed=3)
        sets = [
            (f"flat-{j}", PredictionSet(base.logits / (1.0 + 0.8 * j), base.labels))
            for j in range(5)
        ]
        ladder = build_ladder(sets)
        means = [s.mean_pmax for s in ladder.sets]
        assert means == sorted(means, reverse=True)

    def test_identical_sets_identical_summaries(self):
        cal = calibrated_set(1.5, 200, 3, seed=4)
        ladder = build_ladder([("a", cal), ("b", cal)])
        assert ladder.sets[0].temperature == ladder.sets[1].temperature
        assert ladder.sets[0].mean_pmax == ladder.sets[1].mean_pmax

    def test_unlabeled_set_rejected(self):
        with pytest.raises(ValueError, match="unlabeled"):
            build_ladder([("a", PredictionSet([[1.0, 0.0]]))])

    def test_mixed_class_count_rejected(self):
        a = calibrated_set(1.0, 50, 2, seed=5)
        b = calibrated_set(1.0, 50, 3, seed=5)
        with pytest.raises(ValueError, match="classes"):
            build_ladder([("a", a), ("b", b)])


class TestSacSelect:
    def test_nearest_mean_example(self):
        means = [0.95, 0.88, 0.74, 0.63, 0.51, 0.40]
        assert select_by_mean(means, 0.62) == 4
        ladder = summary_ladder(means)
        test = pmax_set([0.62, 0.62])
        assert sac_select(ladder, test, "mean").selected == 4

    def test_self_match_all_distances(self):
        base = calibrated_set(1.0, 200, 4, seed=6)
        sets = [
            (f"flat-{j}", PredictionSet(base.logits / (1.0 + 0.9 * j), base.labels))
            for j in range(4)
        ]
        ladder = build_ladder(sets)
        target = ladder.sets[2].preds
        for distance in ("mean", "ks", "w1"):
            assert sac_select(ladder, target, distance).selected == 3

    def test_midway_tie_selects_lower_index(self):
        ladder = summary_ladder([0.75, 0.25])
        test = pmax_set([0.5001, 0.4999][0:1] * 2)  # mean pmax approx 0.5
        # Exact tie via select_by_mean with dyadic values.
        assert select_by_mean([0.75, 0.25], 0.5) == 1

    def test_matches_independent_argmin_on_random_ladders(self):
        rng = np.random.default_rng(7)
        for _ in range(300):
            j = int(rng.integers(1, 9))
            means = rng.uniform(0.2, 1.0, size=j)
            test_p = rng.uniform(0.51, 0.99, size=int(rng.integers(1, 30)))
            ladder = summary_ladder(means)
            got = sac_select(ladder, pmax_set(test_p), "mean").selected
            mu = float(np.mean(np.maximum(test_p, 1 - test_p)))
            expected = min(range(j), key=lambda i: abs(mu - float(means[i]))) + 1
            assert got == expected

    def test_sac_is_ts_with_selected_temperature(self):
        base = calibrated_set(1.0, 300, 3, seed=8)
        sets = [
            (f"flat-{j}", PredictionSet(base.logits / (1.0 + j), base.labels))
            for j in range(3)
        ]
        ladder = build_ladder(sets)
        test = calibrated_set(2.0, 100, 3, seed=9)
        model = sac_select(ladder, test, "mean")
        t = ladder.sets[model.selected - 1].temperature.temperature
        assert np.array_equal(model_probs(model, test), softmax(test.logits / t))

    def test_subsample_validation(self):
        ladder = summary_ladder([0.8])
        test = pmax_set([0.7] * 10)
        with pytest.raises(ValueError, match="subsample"):
            sac_select(ladder, test, "mean", subsample=11)
        with pytest.raises(ValueError, match="at least 1"):
            sac_select(ladder, test, "mean", subsample=0)

    def test_subsample_deterministic_with_seed(self):
        ladder = summary_ladder([0.6, 0.7, 0.8, 0.9])
        rng = np.random.default_rng(10)
        test = pmax_set(rng.uniform(0.55, 0.95, size=500))
        a = sac_select(ladder, test, "mean", subsample=50, seed=3).selected
        b = sac_select(ladder, test, "mean", subsample=50, seed=3).selected
        assert a == b

    def test_unknown_distance_rejected(self):
        ladder = summary_ladder([0.8])
        with pytest.raises(ValueError, match="distance"):
            sac_select(ladder, pmax_set([0.7]), "energy")


class TestStsFit:
    def test_union_of_one_equals_ts(self):
        cal = calibrated_set(2.0, 400, 3, seed=11)
        ladder = build_ladder([("clean", cal)])
        assert abs(sts_fit(ladder).temperature - fit_temperature(cal).temperature) <= 1e-6

    def test_duplication_invariance(self):
        cal = calibrated_set(1.7, 300, 3, seed=12)
        one = sts_fit(build_ladder([("a", cal)]))
        two = sts_fit(build_ladder([("a", cal), ("b", cal)]))
        assert abs(one.temperature - two.temperature) <= 1e-6

    def test_union_temperature_between_individual_fits(self):
        a = calibrated_set(1.0, 2000, 3, seed=13)
        b = calibrated_set(3.0, 2000, 3, seed=14)
        ladder = build_ladder([("a", a), ("b", b)])
        t_a = ladder.sets[0].temperature.temperature
        t_b = ladder.sets[1].temperature.temperature
        t_union = sts_fit(ladder).temperature
        assert min(t_a, t_b) < t_union < max(t_a, t_b)
        # Verify against a grid search on the union objective.
        logits = np.concatenate([a.logits, b.logits])
        labels = np.concatenate([a.labels, b.labels])
        def obj(t):
            p = np.clip(softmax(logits / t)[np.arange(len(labels)), labels], 1e-12, 1.0)
            return float(-np.log(p).mean())
        assert abs(t_union - grid_search_temperature(obj, points=400)) <= 0.05


class TestDistances:
    def test_identical_samples_zero(self):
        a = [0.2, 0.5, 0.9]
        assert dist_mean(a, a) == 0.0
        assert dist_ks(a, a) == 0.0
        assert dist_w1(a, a) == 0.0

    def test_disjoint_point_masses(self):
        a, b = [0.0, 0.0], [1.0, 1.0]
        assert dist_mean(a, b) == 1.0
        assert dist_ks(a, b) == 1.0
        assert dist_w1(a, b) == pytest.approx(1.0, abs=1e-15)

    def test_w1_sorted_pair_average(self):
        assert dist_w1([0.0, 1.0], [0.5, 1.5]) == pytest.approx(0.5, abs=1e-15)

    def test_symmetry(self):
        rng = np.random.default_rng(15)
        a = rng.uniform(size=20)
        b = rng.uniform(size=33)
        assert dist_ks(a, b) == dist_ks(b, a)
        assert dist_w1(a, b) == pytest.approx(dist_w1(b, a), abs=1e-15)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(16)
        for _ in range(100):
            a = rng.uniform(size=int(rng.integers(1, 51)))
            b = rng.uniform(size=int(rng.integers(1, 51)))
            assert dist_ks(a, b) == pytest.approx(reference_ks(a.tolist(), b.tolist()), abs=1e-12)
            assert dist_w1(a, b) == pytest.approx(reference_w1(a.tolist(), b.tolist()), abs=1e-12)

    def test_equal_size_w1_is_mean_sorted_difference(self):
        rng = np.random.default_rng(17)
        a = rng.uniform(size=25)
        b = rng.uniform(size=25)
        expected = float(np.abs(np.sort(a) - np.sort(b)).mean())
        assert dist_w1(a, b) == pytest.approx(expected, abs=1e-12)

    def test_empty_sample_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            dist_mean([], [0.5])
