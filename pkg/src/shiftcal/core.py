"""Domain types and numerically stable probability primitives.

Everything here is a pure function of immutable inputs; the types are frozen
dataclasses wrapping read-only numpy arrays, so concurrent use is safe.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Sentinel label for rows without ground truth (also the on-disk encoding).
UNLABELED = -1

# Probabilities are clamped to this floor before any logarithm so that a
# confidently wrong prediction yields a large but finite loss.
PROB_FLOOR = 1e-12


def _as_readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PredictionSet:
    """Per-sample logits plus optional integer labels.

    ``labels[i] == UNLABELED`` marks a row without ground truth.
    """

    logits: np.ndarray  # (n, K) float64
    labels: np.ndarray  # (n,) int64, UNLABELED where missing

    def __init__(self, logits, labels=None) -> None:
        logits = np.asarray(logits, dtype=np.float64)
        if logits.ndim != 2:
            raise ValueError(f"logits must be 2-D (rows x classes), got shape {logits.shape}")
        n, k = logits.shape
        if n < 1:
            raise ValueError("prediction set must contain at least one row")
        if k < 2:
            raise ValueError(f"need at least 2 classes, got {k}")
        bad = np.flatnonzero(~np.isfinite(logits).all(axis=1))
        if bad.size:
            raise ValueError(f"non-finite logits in row {bad[0]}")
        if labels is None:
            labels = np.full(n, UNLABELED, dtype=np.int64)
        else:
            labels = np.asarray(labels, dtype=np.int64)
            if labels.shape != (n,):
                raise ValueError(f"labels shape {labels.shape} does not match {n} rows")
            valid = (labels == UNLABELED) | ((labels >= 0) & (labels < k))
            if not valid.all():
                i = int(np.flatnonzero(~valid)[0])
                raise ValueError(f"label {labels[i]} out of range [0, {k}) in row {i}")
        object.__setattr__(self, "logits", _as_readonly(logits))
        object.__setattr__(self, "labels", _as_readonly(labels))

    @property
    def n(self) -> int:
        return self.logits.shape[0]

    @property
    def num_classes(self) -> int:
        return self.logits.shape[1]

    @property
    def fully_labeled(self) -> bool:
        return bool((self.labels != UNLABELED).all())

    def require_labels(self) -> np.ndarray:
        if not self.fully_labeled:
            i = int(np.flatnonzero(self.labels == UNLABELED)[0])
            raise ValueError(f"operation requires labels for every row; row {i} is unlabeled")
        return self.labels


@dataclass(frozen=True)
class ProbabilityRow:
    """One calibrated probability vector with its top-1 summary."""

    probs: np.ndarray
    predicted_class: int
    pmax: float


@dataclass(frozen=True)
class VanillaModel:
    """Identity calibrator: the raw softmax probabilities."""


@dataclass(frozen=True)
class TemperatureModel:
    """Single-temperature calibrator: softmax(logits / temperature)."""

    temperature: float
    objective: str = "nll"

    def __post_init__(self) -> None:
        t = self.temperature
        if not (np.isfinite(t) and t > 0):
            raise ValueError(f"temperature must be positive and finite, got {t}")


@dataclass(frozen=True)
class LadderEntrySummary:
    """Per-surrogate-set summary: fitted temperature and mean top-1 confidence."""

    tag: str
    temperature: float
    mean_pmax: float


@dataclass(frozen=True)
class SacLadderModel:
    """Surrogate ladder with an optionally selected entry (1-based index)."""

    entries: tuple[LadderEntrySummary, ...]
    selected: int | None = None

    def __post_init__(self) -> None:
        if not self.entries:
            raise ValueError("ladder model must contain at least one entry")
        if self.selected is not None and not (1 <= self.selected <= len(self.entries)):
            raise ValueError(
                f"selected index {self.selected} outside 1..{len(self.entries)}"
            )


CalibrationModel = VanillaModel | TemperatureModel | SacLadderModel


def softmax(logits) -> np.ndarray:
    """Stable softmax along the last axis (max-subtraction)."""
    a = np.asarray(logits, dtype=np.float64)
    if a.ndim == 0 or a.shape[-1] < 2:
        raise ValueError("softmax needs at least 2 classes")
    finite = np.isfinite(a).all(axis=-1)
    if not np.all(finite):
        if a.ndim == 1:
            raise ValueError("non-finite logits in row 0")
        i = int(np.flatnonzero(~finite.reshape(-1))[0])
        raise ValueError(f"non-finite logits in row {i}")
    shifted = a - a.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def model_temperature(model: CalibrationModel) -> float:
    """Effective temperature of a calibrator (1.0 for vanilla)."""
    if isinstance(model, VanillaModel):
        return 1.0
    if isinstance(model, TemperatureModel):
        return model.temperature
    if isinstance(model, SacLadderModel):
        if model.selected is None:
            raise ValueError("ladder model has no selected entry")
        return model.entries[model.selected - 1].temperature
    raise TypeError(f"unknown model type {type(model).__name__}")


def model_probs(model: CalibrationModel, preds: PredictionSet) -> np.ndarray:
    """Calibrated probability matrix (n, K) for a prediction set."""
    t = model_temperature(model)
    if t == 1.0:
        return softmax(preds.logits)
    return softmax(preds.logits / t)


def apply_model(model: CalibrationModel, preds: PredictionSet) -> list[ProbabilityRow]:
    """Calibrate every row, returning per-row probability summaries.

    The argmax is unchanged by temperature scaling, so ``predicted_class``
    is identical across model kinds for the same row; ties go to the lowest
    class index (numpy argmax returns the first maximum).
    """
    probs = model_probs(model, preds)
    pred = np.argmax(probs, axis=1)
    pmax = probs[np.arange(probs.shape[0]), pred]
    return [
        ProbabilityRow(probs=_as_readonly(probs[i]), predicted_class=int(pred[i]), pmax=float(pmax[i]))
        for i in range(probs.shape[0])
    ]


def pmax_values(preds: PredictionSet, model: CalibrationModel = VanillaModel()) -> np.ndarray:
    """Top-1 confidence per row under the given calibrator."""
    return model_probs(model, preds).max(axis=1)


def predicted_classes(preds: PredictionSet) -> np.ndarray:
    """Argmax class per row (temperature-invariant)."""
    return np.argmax(preds.logits, axis=1)


def correctness(preds: PredictionSet) -> np.ndarray:
    """Boolean per-row top-1 correctness; requires labels."""
    labels = preds.require_labels()
    return predicted_classes(preds) == labels
