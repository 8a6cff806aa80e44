"""Scalar temperature optimization.

Minimizes one of three calibration objectives over a bounded temperature
range with a coarse log-spaced grid followed by golden-section refinement.
The bracketed search is robust to the non-smooth weighted-ECE objective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from shiftcal.core import PROB_FLOOR, PredictionSet, softmax
from shiftcal.metrics import DEFAULT_NUM_BINS, ece_weighted

T_MIN = 0.05
T_MAX = 20.0
GRID_POINTS = 200
REFINE_TOL = 1e-4

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0

OBJECTIVE_KINDS = ("nll", "weighted_brier", "weighted_ece")


@dataclass(frozen=True)
class TemperatureFit:
    temperature: float
    objective_value: float
    objective_kind: str
    evaluations: int


def _normalize_weights(weights, n: int) -> np.ndarray:
    if weights is None:
        return np.ones(n)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (n,):
        raise ValueError(f"expected {n} weights, got shape {weights.shape}")
    if not np.isfinite(weights).all() or (weights <= 0).any():
        raise ValueError("weights must be positive and finite")
    total = weights.sum()
    if total <= 0:
        raise ValueError("weights sum to zero")
    # Mean-1 normalization makes the objective invariant to weight scale.
    return weights * (n / total)


def _make_objective(cal: PredictionSet, kind: str, w: np.ndarray):
    labels = cal.require_labels()
    logits = cal.logits
    n, k = logits.shape
    rows = np.arange(n)
    onehot = np.zeros((n, k))
    onehot[rows, labels] = 1.0
    correct = np.argmax(logits, axis=1) == labels
    w_total = w.sum()

    if kind == "nll":
        def obj(t: float) -> float:
            p = np.clip(softmax(logits / t)[rows, labels], PROB_FLOOR, 1.0)
            return float((w * -np.log(p)).sum() / w_total)
    elif kind == "weighted_brier":
        def obj(t: float) -> float:
            probs = softmax(logits / t)
            return float((w * ((probs - onehot) ** 2).sum(axis=1)).sum() / w_total)
    elif kind == "weighted_ece":
        def obj(t: float) -> float:
            pmax = softmax(logits / t).max(axis=1)
            return ece_weighted(pmax, correct, w, DEFAULT_NUM_BINS)
    else:
        raise ValueError(f"unknown objective kind {kind!r}; expected one of {OBJECTIVE_KINDS}")
    return obj


def fit_temperature(cal: PredictionSet, objective_kind: str = "nll", weights=None) -> TemperatureFit:
    """Fit the temperature minimizing the given objective on a labeled set.

    Searches a 200-point log grid over [0.05, 20] (plus T=1), then refines
    the bracketing interval by golden-section search to 1e-4 absolute
    tolerance in T. Deterministic given its inputs.
    """
    labels = cal.require_labels()
    if np.unique(labels).size == 1 and (cal.logits == cal.logits[0]).all():
        raise ValueError(
            "degenerate calibration set: single label and identical logits give a flat objective"
        )
    w = _normalize_weights(weights, cal.n)
    obj = _make_objective(cal, objective_kind, w)

    grid = np.geomspace(T_MIN, T_MAX, GRID_POINTS)
    grid = np.unique(np.append(grid, 1.0))
    values = [obj(float(t)) for t in grid]
    evaluations = len(values)
    best = int(np.argmin(values))
    best_t = float(grid[best])
    best_v = values[best]

    a = float(grid[max(best - 1, 0)])
    b = float(grid[min(best + 1, grid.size - 1)])

    # Golden-section refinement on the bracketing interval.
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    yc, yd = obj(c), obj(d)
    evaluations += 2
    for t, y in ((c, yc), (d, yd)):
        if y < best_v:
            best_t, best_v = t, y
    while b - a > REFINE_TOL:
        if yc < yd:
            b, d, yd = d, c, yc
            c = b - _INV_PHI * (b - a)
            yc = obj(c)
            evaluations += 1
            if yc < best_v:
                best_t, best_v = c, yc
        else:
            a, c, yc = c, d, yd
            d = a + _INV_PHI * (b - a)
            yd = obj(d)
            evaluations += 1
            if yd < best_v:
                best_t, best_v = d, yd

    if not math.isfinite(best_v):
        raise ValueError("objective is not finite over the search range")
    return TemperatureFit(
        temperature=best_t,
        objective_value=best_v,
        objective_kind=objective_kind,
        evaluations=evaluations,
    )
