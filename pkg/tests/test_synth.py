import numpy as np
import pytest

from shiftcal.core import correctness, pmax_values
from shiftcal.metrics import ece_from_scores
from shiftcal.scaling import fit_temperature
from shiftcal.synth import SynthSpec, default_class_means, generate


class TestSpecValidation:
    def test_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            SynthSpec(num_classes=1, dim=2, n=10, seed=0)
        with pytest.raises(ValueError):
            SynthSpec(num_classes=3, dim=2, n=10, seed=0, shift_std=-1.0)
        with pytest.raises(ValueError):
            SynthSpec(num_classes=3, dim=2, n=10, seed=0, temperature_distortion=0.0)

    def test_class_means_shape_checked(self):
        with pytest.raises(ValueError, match="class_means"):
            SynthSpec(num_classes=3, dim=2, n=10, seed=0, class_means=np.zeros((2, 2)))

    def test_default_means_deterministic(self):
        assert np.array_equal(default_class_means(4, 6), default_class_means(4, 6))
        assert np.array_equal(default_class_means(9, 3), default_class_means(9, 3))
        norms = np.linalg.norm(default_class_means(9, 3, 2.0), axis=1)
        assert np.allclose(norms, 2.0)


class TestGenerate:
    def test_same_seed_bit_identical(self):
        spec = SynthSpec(num_classes=4, dim=5, n=200, seed=123, shift_std=1.0)
        a_preds, a_conf = generate(spec)
        b_preds, b_conf = generate(spec)
        assert np.array_equal(a_preds.logits, b_preds.logits)
        assert np.array_equal(a_preds.labels, b_preds.labels)
        assert np.array_equal(a_conf, b_conf)

    def test_no_shift_no_distortion_is_calibrated(self):
        spec = SynthSpec(num_classes=5, dim=8, n=20000, seed=7)
        preds, true_conf = generate(spec)
        e = ece_from_scores(pmax_values(preds), correctness(preds), 15)
        assert e < 0.01
        # With no shift the emitted probabilities ARE the true posterior.
        assert np.allclose(pmax_values(preds), true_conf, atol=1e-9)

    def test_distortion_recovered_by_temperature_fit(self):
        spec = SynthSpec(num_classes=3, dim=4, n=10000, seed=7, temperature_distortion=2.0)
        preds, _ = generate(spec)
        assert abs(fit_temperature(preds).temperature - 2.0) <= 0.05

    def test_labels_independent_of_shift(self):
        # Covariate shift by construction: the label stream is untouched by sigma.
        base = generate(SynthSpec(num_classes=4, dim=6, n=500, seed=9))[0]
        shifted = generate(SynthSpec(num_classes=4, dim=6, n=500, seed=9, shift_std=3.0))[0]
        assert np.array_equal(base.labels, shifted.labels)

    def test_overconfidence_under_large_shift(self):
        clean = SynthSpec(num_classes=5, dim=8, n=8000, seed=11, separation=2.0)
        big = SynthSpec(num_classes=5, dim=8, n=8000, seed=11, separation=2.0, shift_std=10.0)
        p_clean, _ = generate(clean)
        p_big, _ = generate(big)
        acc_big = correctness(p_big).mean()
        assert acc_big < 0.35  # approaching chance (1/K = 0.2)
        e_clean = ece_from_scores(pmax_values(p_clean), correctness(p_clean), 15)
        e_big = ece_from_scores(pmax_values(p_big), correctness(p_big), 15)
        assert e_big > 3 * e_clean
        # Confidence stays high even though accuracy collapsed.
        assert pmax_values(p_big).mean() > 0.5

    def test_mean_pmax_rises_with_shift(self):
        # Shift pushes observations to the tails where the linear logits
        # saturate, so confidence rises with shift even as accuracy falls
        # (the overconfidence phenomenon). Small sigmas can wobble within
        # sampling noise; the trend from sigma >= 1 upward is strict.
        means = []
        for sigma in (0.0, 1.0, 2.0, 4.0):
            preds, _ = generate(
                SynthSpec(num_classes=5, dim=8, n=6000, seed=13, shift_std=sigma)
            )
            means.append(float(pmax_values(preds).mean()))
        assert means[-1] > means[0]
        assert means[1] < means[2] < means[3]

    def test_true_confidence_in_unit_interval(self):
        preds, conf = generate(SynthSpec(num_classes=3, dim=3, n=300, seed=5, shift_std=2.0))
        assert ((conf > 0) & (conf <= 1)).all()
