import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shiftcal.core import (
    PredictionSet,
    SacLadderModel,
    LadderEntrySummary,
    TemperatureModel,
    VanillaModel,
    apply_model,
    model_probs,
    model_temperature,
    softmax,
)


class TestSoftmax:
    def test_uniform_on_equal_logits(self):
        assert np.allclose(softmax([0.0, 0.0, 0.0, 0.0]), [0.25] * 4, atol=1e-15)

    def test_analytic_two_class(self):
        out = softmax([math.log(2.0), 0.0])
        assert np.allclose(out, [2 / 3, 1 / 3], atol=1e-15)

    def test_no_overflow_on_large_logits(self):
        out = softmax([1000.0, 0.0])
        assert np.all(np.isfinite(out))
        assert out[0] == pytest.approx(1.0, abs=1e-12)
        assert out[1] == pytest.approx(0.0, abs=1e-12)

    def test_rejects_non_finite_with_row(self):
        with pytest.raises(ValueError, match="row 1"):
            softmax(np.array([[0.0, 1.0], [np.inf, 0.0]]))

    @settings(max_examples=50, deadline=None)
    @given(
        logits=st.lists(st.floats(-50, 50), min_size=2, max_size=6),
        shift=st.floats(-100, 100),
    )
    def test_shift_invariance(self, logits, shift):
        a = np.array(logits)
        assert np.allclose(softmax(a), softmax(a + shift), atol=1e-12)

    def test_sums_to_one(self):
        rng = np.random.default_rng(0)
        probs = softmax(rng.normal(size=(100, 7)) * 10)
        assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-12)


class TestPredictionSet:
    def test_basic_shape(self):
        ps = PredictionSet([[1.0, 2.0], [0.0, 0.0]], [0, 1])
        assert ps.n == 2 and ps.num_classes == 2 and ps.fully_labeled

    def test_unlabeled_rows(self):
        ps = PredictionSet([[1.0, 2.0]], [-1])
        assert not ps.fully_labeled
        with pytest.raises(ValueError, match="unlabeled"):
            ps.require_labels()

    def test_rejects_single_class(self):
        with pytest.raises(ValueError, match="2 classes"):
            PredictionSet([[1.0]])

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            PredictionSet(np.empty((0, 2)))

    def test_rejects_bad_label(self):
        with pytest.raises(ValueError, match="out of range"):
            PredictionSet([[1.0, 2.0]], [2])

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError, match="row 0"):
            PredictionSet([[np.nan, 2.0]])


class TestApplyModel:
    def test_temperature_one_matches_vanilla_bitwise(self):
        rng = np.random.default_rng(1)
        ps = PredictionSet(rng.normal(size=(50, 4)))
        v = model_probs(VanillaModel(), ps)
        t = model_probs(TemperatureModel(temperature=1.0), ps)
        assert np.array_equal(v, t)

    def test_halved_logits_analytic(self):
        # softmax([2,0]/2) = [e/(e+1), 1/(e+1)]
        rows = apply_model(TemperatureModel(temperature=2.0), PredictionSet([[2.0, 0.0]]))
        expected = math.e / (math.e + 1.0)
        assert rows[0].probs[0] == pytest.approx(expected, abs=1e-12)
        assert rows[0].pmax == pytest.approx(expected, abs=1e-12)

    def test_higher_temperature_flattens(self):
        ps = PredictionSet([[3.0, 1.0, 0.0]])
        def entropy(t):
            p = model_probs(TemperatureModel(temperature=t), ps)[0]
            return -np.sum(p * np.log(p))
        assert entropy(10.0) > entropy(1.0)

    @settings(max_examples=50, deadline=None)
    @given(
        logits=st.lists(st.floats(-30, 30), min_size=3, max_size=3),
        temp=st.floats(0.05, 20.0),
    )
    def test_argmax_invariant_under_temperature(self, logits, temp):
        ps = PredictionSet([logits])
        vanilla = apply_model(VanillaModel(), ps)[0]
        scaled = apply_model(TemperatureModel(temperature=temp), ps)[0]
        assert vanilla.predicted_class == scaled.predicted_class

    def test_tie_breaks_to_lowest_index(self):
        rows = apply_model(VanillaModel(), PredictionSet([[1.0, 1.0, 0.0]]))
        assert rows[0].predicted_class == 0

    def test_deterministic(self):
        rng = np.random.default_rng(2)
        ps = PredictionSet(rng.normal(size=(20, 3)))
        a = model_probs(TemperatureModel(temperature=1.7), ps)
        b = model_probs(TemperatureModel(temperature=1.7), ps)
        assert np.array_equal(a, b)


class TestModels:
    def test_temperature_must_be_positive(self):
        with pytest.raises(ValueError):
            TemperatureModel(temperature=0.0)
        with pytest.raises(ValueError):
            TemperatureModel(temperature=math.inf)

    def test_ladder_selected_bounds(self):
        entries = (LadderEntrySummary("a", 1.0, 0.9),)
        with pytest.raises(ValueError):
            SacLadderModel(entries=entries, selected=2)
        assert model_temperature(SacLadderModel(entries=entries, selected=1)) == 1.0

    def test_ladder_without_selection_has_no_temperature(self):
        entries = (LadderEntrySummary("a", 1.0, 0.9),)
        with pytest.raises(ValueError, match="selected"):
            model_temperature(SacLadderModel(entries=entries))
