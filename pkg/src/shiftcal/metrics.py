"""Calibration-quality measures.

Top-1 expected calibration error with equal-mass binning, negative log
likelihood, and (weighted) Brier score. Summation order is fixed and uses
``math.fsum`` so results are bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from shiftcal.core import PROB_FLOOR, ProbabilityRow

DEFAULT_NUM_BINS = 15


@dataclass(frozen=True)
class ReliabilityBin:
    count: int
    accuracy: float
    mean_confidence: float
    lower_edge: float
    upper_edge: float


@dataclass(frozen=True)
class BinnedReliability:
    """Equal-mass partition of predictions sorted by top-1 confidence."""

    bins: tuple[ReliabilityBin, ...]
    total: int


def _equal_mass_sizes(n: int, m: int) -> list[int]:
    # Remainder rows go to the lowest-confidence (earliest) bins.
    q, r = divmod(n, m)
    return [q + 1] * r + [q] * (m - r)


def bin_equal_mass(pmax, correct, num_bins: int) -> BinnedReliability:
    """Partition (pmax, correct) pairs into ``num_bins`` equal-count bins.

    Rows are stably sorted ascending by pmax and split into contiguous
    chunks; the first ``n % num_bins`` chunks get one extra row.
    """
    pmax = np.asarray(pmax, dtype=np.float64)
    correct = np.asarray(correct, dtype=bool)
    if pmax.ndim != 1 or pmax.shape != correct.shape:
        raise ValueError("pmax and correct must be 1-D arrays of the same length")
    n = pmax.shape[0]
    if num_bins < 1:
        raise ValueError(f"need at least one bin, got {num_bins}")
    if n < num_bins:
        raise ValueError(f"cannot form {num_bins} bins from {n} rows")
    order = np.argsort(pmax, kind="stable")
    p_sorted = pmax[order]
    c_sorted = correct[order]
    bins = []
    start = 0
    for size in _equal_mass_sizes(n, num_bins):
        stop = start + size
        chunk_p = p_sorted[start:stop]
        chunk_c = c_sorted[start:stop]
        bins.append(
            ReliabilityBin(
                count=size,
                accuracy=math.fsum(1.0 if c else 0.0 for c in chunk_c) / size,
                mean_confidence=math.fsum(float(v) for v in chunk_p) / size,
                lower_edge=float(chunk_p[0]),
                upper_edge=float(chunk_p[-1]),
            )
        )
        start = stop
    return BinnedReliability(bins=tuple(bins), total=n)


def ece(binned: BinnedReliability) -> float:
    """Bin-count-weighted mean absolute accuracy/confidence gap."""
    return math.fsum(
        (b.count / binned.total) * abs(b.accuracy - b.mean_confidence) for b in binned.bins
    )


def ece_from_scores(pmax, correct, num_bins: int = DEFAULT_NUM_BINS) -> float:
    return ece(bin_equal_mass(pmax, correct, num_bins))


def ece_weighted(pmax, correct, weights, num_bins: int = DEFAULT_NUM_BINS) -> float:
    """ECE over the equal-count partition with per-row weights as bin mass.

    The partition is the same equal-count split as :func:`bin_equal_mass`;
    per-bin accuracy and confidence become weighted means and each bin's
    mass is its weight sum.
    """
    pmax = np.asarray(pmax, dtype=np.float64)
    correct = np.asarray(correct, dtype=bool)
    weights = np.asarray(weights, dtype=np.float64)
    if not (pmax.shape == correct.shape == weights.shape) or pmax.ndim != 1:
        raise ValueError("pmax, correct, and weights must be 1-D arrays of the same length")
    if not np.isfinite(weights).all() or (weights <= 0).any():
        raise ValueError("weights must be positive and finite")
    n = pmax.shape[0]
    if n < num_bins:
        raise ValueError(f"cannot form {num_bins} bins from {n} rows")
    order = np.argsort(pmax, kind="stable")
    p_sorted = pmax[order]
    c_sorted = correct[order]
    w_sorted = weights[order]
    total_mass = math.fsum(float(w) for w in w_sorted)
    out = 0.0
    start = 0
    for size in _equal_mass_sizes(n, num_bins):
        stop = start + size
        mass = math.fsum(float(w) for w in w_sorted[start:stop])
        acc = math.fsum(float(w) for w, c in zip(w_sorted[start:stop], c_sorted[start:stop]) if c) / mass
        conf = math.fsum(float(w * p) for w, p in zip(w_sorted[start:stop], p_sorted[start:stop])) / mass
        out += (mass / total_mass) * abs(acc - conf)
        start = stop
    return out


def _as_prob_matrix(probs) -> np.ndarray:
    if isinstance(probs, (list, tuple)) and probs and isinstance(probs[0], ProbabilityRow):
        return np.stack([r.probs for r in probs])
    return np.asarray(probs, dtype=np.float64)


def _check_labels(labels, n: int, k: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise ValueError(f"expected {n} labels, got shape {labels.shape}")
    if ((labels < 0) | (labels >= k)).any():
        i = int(np.flatnonzero((labels < 0) | (labels >= k))[0])
        raise ValueError(f"row {i} has no valid label (got {labels[i]})")
    return labels.astype(np.int64)


def nll(probs, labels) -> float:
    """Mean negative log probability of the true class (clamped)."""
    p = _as_prob_matrix(probs)
    n, k = p.shape
    labels = _check_labels(labels, n, k)
    true_p = np.clip(p[np.arange(n), labels], PROB_FLOOR, 1.0)
    return math.fsum(float(-v) for v in np.log(true_p)) / n


def brier(probs, labels, weights=None) -> float:
    """Mean squared distance to the one-hot label, optionally row-weighted."""
    p = _as_prob_matrix(probs)
    n, k = p.shape
    labels = _check_labels(labels, n, k)
    onehot = np.zeros((n, k))
    onehot[np.arange(n), labels] = 1.0
    per_row = ((p - onehot) ** 2).sum(axis=1)
    if weights is None:
        return math.fsum(float(v) for v in per_row) / n
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (n,):
        raise ValueError(f"expected {n} weights, got shape {weights.shape}")
    if not np.isfinite(weights).all() or (weights <= 0).any():
        raise ValueError("weights must be positive and finite")
    total = math.fsum(float(w) for w in weights)
    return math.fsum(float(w * v) for w, v in zip(weights, per_row)) / total


def accuracy(correct) -> float:
    correct = np.asarray(correct, dtype=bool)
    return math.fsum(1.0 if c else 0.0 for c in correct) / correct.shape[0]
