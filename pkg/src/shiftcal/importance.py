"""Importance-weight estimation via a source-vs-target domain classifier.

A binary logistic discriminator is trained on feature vectors (label 0 =
source, label 1 = target); its odds on the calibration rows estimate the
density ratio used by the weighted-Brier (CPCS) and weighted-ECE
(transcal-lite) temperature fits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from shiftcal.core import PredictionSet
from shiftcal.scaling import TemperatureFit, fit_temperature

L2_PENALTY = 1e-3
MAX_ITERS = 500
GRAD_TOL = 1e-6
_PROB_CAP = 1e-12  # discriminator output within this of 1 counts as "numerically 1"


@dataclass(frozen=True)
class FeatureSet:
    features: np.ndarray  # (n, d) float64

    def __init__(self, features) -> None:
        features = np.ascontiguousarray(np.asarray(features, dtype=np.float64))
        if features.ndim != 2:
            raise ValueError(f"features must be 2-D (rows x dims), got shape {features.shape}")
        if not np.isfinite(features).all():
            i = int(np.flatnonzero(~np.isfinite(features).all(axis=1))[0])
            raise ValueError(f"non-finite feature values in row {i}")
        features.setflags(write=False)
        object.__setattr__(self, "features", features)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class ImportanceWeights:
    """Per-calibration-row density-ratio estimates, normalized to mean 1."""

    weights: np.ndarray

    def __init__(self, weights) -> None:
        weights = np.asarray(weights, dtype=np.float64)
        if weights.ndim != 1 or weights.size == 0:
            raise ValueError("weights must be a non-empty 1-D array")
        if not np.isfinite(weights).all() or (weights <= 0).any():
            raise ValueError("weights must be positive and finite")
        if abs(float(weights.mean()) - 1.0) > 1e-9:
            raise ValueError(f"weights must have mean 1, got {weights.mean()}")
        weights = np.ascontiguousarray(weights)
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _train_discriminator(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float]:
    """Full-batch gradient descent on L2-penalized logistic loss.

    Deterministic: zero init, backtracking (Armijo) line search, at most
    MAX_ITERS iterations or until the gradient norm drops below GRAD_TOL.
    """
    n, d = x.shape
    w = np.zeros(d)
    b = 0.0
    s = 2.0 * y - 1.0  # +/-1 targets

    def loss(w, b):
        z = x @ w + b
        return float(np.logaddexp(0.0, -s * z).mean() + 0.5 * L2_PENALTY * (w @ w))

    cur = loss(w, b)
    step = 1.0
    for _ in range(MAX_ITERS):
        p = _sigmoid(x @ w + b)
        resid = p - y
        grad_w = x.T @ resid / n + L2_PENALTY * w
        grad_b = float(resid.mean())
        gnorm2 = float(grad_w @ grad_w) + grad_b * grad_b
        if np.sqrt(gnorm2) < GRAD_TOL:
            break
        step = min(step * 2.0, 1e4)
        while True:
            w_new = w - step * grad_w
            b_new = b - step * grad_b
            new = loss(w_new, b_new)
            if new <= cur - 1e-4 * step * gnorm2 or step < 1e-12:
                break
            step *= 0.5
        w, b, cur = w_new, b_new, new
    return w, b


def estimate_weights(source: FeatureSet, target: FeatureSet, cal: FeatureSet) -> ImportanceWeights:
    """Estimate density-ratio weights for the calibration rows.

    Raw weight per row is (n_source / n_target) * p / (1 - p) where p is
    the discriminator's target probability; rows where p is numerically 1
    are clamped to the 99th percentile of the raw weights, and the result
    is normalized to mean 1.
    """
    if source.dim != target.dim or source.dim != cal.dim:
        raise ValueError(
            f"feature dims differ: source {source.dim}, target {target.dim}, cal {cal.dim}"
        )
    x = np.concatenate([source.features, target.features])
    y = np.concatenate([np.zeros(source.n), np.ones(target.n)])
    w, b = _train_discriminator(x, y)

    p = _sigmoid(cal.features @ w + b)
    saturated = p >= 1.0 - _PROB_CAP
    p_safe = np.clip(p, _PROB_CAP, 1.0 - _PROB_CAP)
    raw = (source.n / target.n) * p_safe / (1.0 - p_safe)
    if saturated.any():
        cap = np.percentile(raw[~saturated], 99) if (~saturated).any() else np.percentile(raw, 99)
        raw = np.where(saturated, cap, raw)
    raw = np.maximum(raw, _PROB_CAP)
    return ImportanceWeights(raw / raw.mean())


def cpcs_fit(cal: PredictionSet, weights: ImportanceWeights) -> TemperatureFit:
    """Temperature minimizing the importance-weighted Brier score."""
    return fit_temperature(cal, "weighted_brier", weights.weights)


def transcal_lite_fit(cal: PredictionSet, weights: ImportanceWeights) -> TemperatureFit:
    """Temperature minimizing the importance-weighted ECE.

    Implements only the weighted-ECE minimization; no bias or variance
    correction terms are applied.
    """
    return fit_temperature(cal, "weighted_ece", weights.weights)
