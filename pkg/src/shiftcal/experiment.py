"""End-to-end synthetic benchmark comparing the calibration methods.

Builds a clean calibration set and a ladder of Gaussian-noise surrogates,
then evaluates Vanilla, TS, CPCS, STS, and SAC on held-out test sets
corrupted at five intensities with a noise type never used to build the
ladder (uniform instead of Gaussian). Everything is deterministic given
the seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from shiftcal.core import (
    CalibrationModel,
    PredictionSet,
    SacLadderModel,
    TemperatureModel,
    VanillaModel,
    correctness,
    model_probs,
)
from shiftcal.importance import FeatureSet, cpcs_fit, estimate_weights
from shiftcal.metrics import accuracy as top1_accuracy
from shiftcal.metrics import ece_from_scores
from shiftcal.scaling import fit_temperature
from shiftcal.surrogate import SurrogateLadder, build_ladder, sac_select, sts_fit
from shiftcal.synth import default_class_means, draw_population, posterior_logits

# Surrogate ladder: clean set plus five Gaussian-noise intensities.
# Spaced so the surrogate mean confidences are roughly equidistant.
SIGMA_LADDER = (0.0, 0.8, 1.4, 2.1, 3.4, 6.5)
# Test-time shift: uniform noise half-widths, unseen by the ladder. Chosen
# so the equivalent noise scale (half-width / sqrt(3)) matches the first
# five ladder sigmas.
UNIFORM_LEVELS = (0.0, 1.39, 2.42, 3.64, 5.89)

METHOD_ORDER = ("vanilla", "ts", "cpcs", "sts", "sac")


@dataclass(frozen=True)
class ExperimentConfig:
    num_classes: int = 10
    dim: int = 10
    separation: float = 0.85
    within_std: float = 1.0
    distortion: float = 2.5
    n_cal: int = 2000
    n_test: int = 2000
    num_bins: int = 15


@dataclass(frozen=True)
class ReportRow:
    method: str
    intensity: int
    ece: float
    accuracy: float
    mean_pmax: float
    selected_index: int | None


def make_calibration(seed: int, cfg: ExperimentConfig = ExperimentConfig()):
    """Clean calibration features, labels, and model predictions."""
    means = default_class_means(cfg.num_classes, cfg.dim, cfg.separation)
    labels, x = draw_population(means, cfg.within_std, cfg.n_cal, np.random.SeedSequence([seed, 1]))
    logits = posterior_logits(x, means, cfg.within_std, cfg.distortion)
    return labels, x, PredictionSet(logits, labels)


def make_ladder(seed: int, cfg: ExperimentConfig = ExperimentConfig()):
    """Ladder of increasingly Gaussian-corrupted copies of the calibration set."""
    means = default_class_means(cfg.num_classes, cfg.dim, cfg.separation)
    labels, x, cal_preds = make_calibration(seed, cfg)
    eps = np.random.default_rng(np.random.SeedSequence([seed, 2])).standard_normal(x.shape)
    tagged = []
    for j, sigma in enumerate(SIGMA_LADDER):
        tag = "clean" if j == 0 else f"gauss-{j}"
        logits = posterior_logits(x + sigma * eps, means, cfg.within_std, cfg.distortion)
        tagged.append((tag, PredictionSet(logits, labels)))
    return build_ladder(tagged), x, cal_preds


def make_test_set(seed: int, intensity: int, cfg: ExperimentConfig = ExperimentConfig()):
    """Held-out test set shifted by uniform noise at the given intensity."""
    if not (0 <= intensity < len(UNIFORM_LEVELS)):
        raise ValueError(f"intensity must be in 0..{len(UNIFORM_LEVELS) - 1}, got {intensity}")
    means = default_class_means(cfg.num_classes, cfg.dim, cfg.separation)
    ss = np.random.SeedSequence([seed, 100 + intensity])
    pop_seq, noise_seq = ss.spawn(2)
    labels, x = draw_population(means, cfg.within_std, cfg.n_test, pop_seq)
    level = UNIFORM_LEVELS[intensity]
    u = np.random.default_rng(noise_seq).uniform(-1.0, 1.0, size=x.shape)
    x_obs = x + level * u
    logits = posterior_logits(x_obs, means, cfg.within_std, cfg.distortion)
    return PredictionSet(logits, labels), x_obs


def evaluate(model: CalibrationModel, test: PredictionSet, num_bins: int) -> tuple[float, float, float]:
    """(ece, accuracy, mean calibrated pmax) for a model on a labeled set."""
    probs = model_probs(model, test)
    pmax = probs.max(axis=1)
    correct = correctness(test)
    return (
        ece_from_scores(pmax, correct, num_bins),
        top1_accuracy(correct),
        float(pmax.mean()),
    )


def run_experiment(seed: int, cfg: ExperimentConfig = ExperimentConfig()) -> list[ReportRow]:
    ladder, x_cal, cal_preds = make_ladder(seed, cfg)
    ts_model = TemperatureModel(temperature=fit_temperature(cal_preds, "nll").temperature)
    sts_model = sts_fit(ladder)

    tests = [make_test_set(seed, i, cfg) for i in range(len(UNIFORM_LEVELS))]
    cal_feats = FeatureSet(x_cal)

    per_method: dict[str, list[tuple[CalibrationModel, int | None]]] = {m: [] for m in METHOD_ORDER}
    for test, x_obs in tests:
        weights = estimate_weights(cal_feats, FeatureSet(x_obs), cal_feats)
        cpcs = TemperatureModel(temperature=cpcs_fit(cal_preds, weights).temperature, objective="cpcs")
        sac = sac_select(ladder, test, distance="mean")
        per_method["vanilla"].append((VanillaModel(), None))
        per_method["ts"].append((ts_model, None))
        per_method["cpcs"].append((cpcs, None))
        per_method["sts"].append((sts_model, None))
        per_method["sac"].append((sac, sac.selected))

    rows = []
    for method in METHOD_ORDER:
        for intensity, (model, selected) in enumerate(per_method[method]):
            e, acc, mean_pmax = evaluate(model, tests[intensity][0], cfg.num_bins)
            rows.append(
                ReportRow(
                    method=method,
                    intensity=intensity,
                    ece=e,
                    accuracy=acc,
                    mean_pmax=mean_pmax,
                    selected_index=selected,
                )
            )
    return rows


def report_csv(rows: list[ReportRow]) -> str:
    lines = ["method,intensity,ece,accuracy,mean_pmax,selected_index"]
    for r in rows:
        sel = "" if r.selected_index is None else str(r.selected_index)
        lines.append(
            f"{r.method},{r.intensity},{r.ece:.6f},{r.accuracy:.6f},{r.mean_pmax:.6f},{sel}"
        )
    return "\n".join(lines) + "\n"
