"""Surrogate calibration ladders: adaptive selection (SAC) and pooling (STS).

A ladder holds labeled calibration sets at increasing synthetic shift
intensity, each with its own fitted temperature and mean top-1 confidence.
SAC picks the entry whose confidence distribution is closest to the
unlabeled test set; STS fits one temperature on the union of all entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from shiftcal.core import (
    LadderEntrySummary,
    PredictionSet,
    SacLadderModel,
    TemperatureModel,
    pmax_values,
)
from shiftcal.scaling import TemperatureFit, fit_temperature

DISTANCES = ("mean", "ks", "w1")
DEFAULT_SUBSAMPLE = 100


@dataclass(frozen=True)
class LadderSet:
    tag: str
    preds: PredictionSet
    temperature: TemperatureFit
    mean_pmax: float


@dataclass(frozen=True)
class SurrogateLadder:
    sets: tuple[LadderSet, ...]

    def __post_init__(self) -> None:
        if not self.sets:
            raise ValueError("ladder must contain at least one set")

    @property
    def size(self) -> int:
        return len(self.sets)

    def summaries(self, selected: int | None = None) -> SacLadderModel:
        return SacLadderModel(
            entries=tuple(
                LadderEntrySummary(tag=s.tag, temperature=s.temperature.temperature, mean_pmax=s.mean_pmax)
                for s in self.sets
            ),
            selected=selected,
        )


def build_ladder(tagged_sets) -> SurrogateLadder:
    """Fit an NLL temperature and record the vanilla mean pmax per set.

    ``tagged_sets`` is a sequence of (tag, labeled PredictionSet); by
    convention the first entry is the clean calibration set.
    """
    tagged_sets = list(tagged_sets)
    if not tagged_sets:
        raise ValueError("ladder must contain at least one set")
    k = tagged_sets[0][1].num_classes
    sets = []
    for tag, preds in tagged_sets:
        if preds.num_classes != k:
            raise ValueError(
                f"set {tag!r} has {preds.num_classes} classes, expected {k}"
            )
        preds.require_labels()
        fit = fit_temperature(preds, "nll")
        mean_pmax = float(np.mean(pmax_values(preds)))
        sets.append(LadderSet(tag=str(tag), preds=preds, temperature=fit, mean_pmax=mean_pmax))
    return SurrogateLadder(sets=tuple(sets))


def _check_sample(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    if a.size == 0:
        raise ValueError(f"{name} sample is empty")
    if not np.isfinite(a).all():
        raise ValueError(f"{name} sample contains non-finite values")
    return a


def dist_mean(a, b) -> float:
    """Absolute difference of sample means."""
    a = _check_sample(a, "first")
    b = _check_sample(b, "second")
    return abs(float(np.mean(a)) - float(np.mean(b)))


def dist_ks(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic: sup |ECDF_a - ECDF_b|."""
    a = np.sort(_check_sample(a, "first"))
    b = np.sort(_check_sample(b, "second"))
    pooled = np.concatenate([a, b])
    fa = np.searchsorted(a, pooled, side="right") / a.size
    fb = np.searchsorted(b, pooled, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def dist_w1(a, b) -> float:
    """1-D Wasserstein distance: exact integral of |ECDF_a - ECDF_b|."""
    a = np.sort(_check_sample(a, "first"))
    b = np.sort(_check_sample(b, "second"))
    pooled = np.sort(np.concatenate([a, b]))
    deltas = np.diff(pooled)
    fa = np.searchsorted(a, pooled[:-1], side="right") / a.size
    fb = np.searchsorted(b, pooled[:-1], side="right") / b.size
    return float(math.fsum(abs(da - db) * float(dx) for da, db, dx in zip(fa, fb, deltas)))


_DIST_FUNCS = {"mean": dist_mean, "ks": dist_ks, "w1": dist_w1}


def select_by_mean(means, test_mean: float) -> int:
    """1-based argmin of |test_mean - means[j]|, ties to the lowest index."""
    best, best_d = 1, abs(test_mean - float(means[0]))
    for j, m in enumerate(means[1:], start=2):
        d = abs(test_mean - float(m))
        if d < best_d:
            best, best_d = j, d
    return best


def select_by_distribution(samples, test_pmax, distance: str) -> int:
    """1-based argmin of distance(entry pmax sample, test pmax sample)."""
    if distance not in _DIST_FUNCS:
        raise ValueError(f"unknown distance {distance!r}; expected one of {DISTANCES}")
    fn = _DIST_FUNCS[distance]
    best, best_d = 0, math.inf
    for j, sample in enumerate(samples, start=1):
        d = fn(sample, test_pmax)
        if d < best_d:
            best, best_d = j, d
    return best


def subsample_pmax(pmax: np.ndarray, subsample: int | None, seed: int | None) -> np.ndarray:
    if subsample is None:
        return pmax
    if subsample < 1:
        raise ValueError("subsample size must be at least 1")
    if subsample > pmax.size:
        raise ValueError(f"subsample {subsample} exceeds test size {pmax.size}")
    rng = np.random.default_rng(seed)
    idx = rng.choice(pmax.size, size=subsample, replace=False)
    return pmax[idx]


def sac_select(
    ladder: SurrogateLadder,
    test: PredictionSet,
    distance: str = "mean",
    subsample: int | None = None,
    seed: int | None = None,
) -> SacLadderModel:
    """Pick the ladder entry closest to the test pmax distribution.

    ``distance="mean"`` compares the test mean pmax against the stored
    per-entry means; ``ks`` and ``w1`` compare the full empirical pmax
    distributions. Ties break to the lowest (least corrupted) index.
    """
    if distance not in _DIST_FUNCS:
        raise ValueError(f"unknown distance {distance!r}; expected one of {DISTANCES}")
    test_pmax = subsample_pmax(pmax_values(test), subsample, seed)
    if distance == "mean":
        selected = select_by_mean([s.mean_pmax for s in ladder.sets], float(np.mean(test_pmax)))
    else:
        samples = [pmax_values(s.preds) for s in ladder.sets]
        selected = select_by_distribution(samples, test_pmax, distance)
    return ladder.summaries(selected=selected)


def sts_fit(ladder: SurrogateLadder) -> TemperatureModel:
    """Fit one NLL temperature on the union of all ladder sets."""
    for s in ladder.sets:
        s.preds.require_labels()
    logits = np.concatenate([s.preds.logits for s in ladder.sets])
    labels = np.concatenate([s.preds.labels for s in ladder.sets])
    union = PredictionSet(logits, labels)
    fit = fit_temperature(union, "nll")
    return TemperatureModel(temperature=fit.temperature, objective="nll")
