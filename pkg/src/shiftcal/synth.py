"""Synthetic covariate-shift benchmark with analytically known confidences.

Samples a Gaussian class-mixture, optionally perturbs the features with
isotropic noise at evaluation time (covariate shift: the label-conditional
law is untouched), and emits the logits of a Bayes classifier that is
unaware of the shift, with an optional temperature distortion. Because the
generative model is known in closed form, the true probability of the
predicted class is available for every row.

Randomness uses numpy's seeded PCG64 with one spawned stream per purpose
(labels, features, noise) so the same seed yields bit-identical output and
the label/feature draws are unchanged when only the shift level varies.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from shiftcal.core import PredictionSet, softmax

DEFAULT_SEPARATION = 2.0


def default_class_means(num_classes: int, dim: int, separation: float = DEFAULT_SEPARATION) -> np.ndarray:
    """Deterministic class-mean layout: scaled basis vectors when they fit,
    otherwise fixed-seed random directions of the same norm."""
    if num_classes <= dim:
        means = np.zeros((num_classes, dim))
        means[np.arange(num_classes), np.arange(num_classes)] = separation
        return means
    rng = np.random.default_rng(np.random.SeedSequence([100003, num_classes, dim]))
    dirs = rng.standard_normal((num_classes, dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return separation * dirs


@dataclass(frozen=True)
class SynthSpec:
    num_classes: int
    dim: int
    n: int
    seed: int
    within_class_std: float = 1.0
    shift_std: float = 0.0
    temperature_distortion: float = 1.0
    separation: float = DEFAULT_SEPARATION
    class_means: np.ndarray | None = field(default=None)

    def __post_init__(self) -> None:
        if self.num_classes < 2:
            raise ValueError(f"need at least 2 classes, got {self.num_classes}")
        if self.dim < 1:
            raise ValueError(f"dim must be positive, got {self.dim}")
        if self.n < 1:
            raise ValueError(f"n must be positive, got {self.n}")
        if not (self.within_class_std > 0):
            raise ValueError("within_class_std must be positive")
        if self.shift_std < 0:
            raise ValueError("shift_std must be non-negative")
        if not (self.temperature_distortion > 0):
            raise ValueError("temperature_distortion must be positive")
        if self.class_means is not None:
            m = np.asarray(self.class_means, dtype=np.float64)
            if m.shape != (self.num_classes, self.dim):
                raise ValueError(
                    f"class_means shape {m.shape} does not match ({self.num_classes}, {self.dim})"
                )
            object.__setattr__(self, "class_means", m)

    def means(self) -> np.ndarray:
        if self.class_means is not None:
            return np.asarray(self.class_means)
        return default_class_means(self.num_classes, self.dim, self.separation)


def draw_population(means: np.ndarray, std: float, n: int, seed_seq: np.random.SeedSequence):
    """Sample (labels, features) from the uniform-prior Gaussian mixture."""
    k, d = means.shape
    s_labels, s_feat = seed_seq.spawn(2)
    labels = np.random.default_rng(s_labels).integers(0, k, size=n)
    x = means[labels] + std * np.random.default_rng(s_feat).standard_normal((n, d))
    return labels, x


def posterior_logits(x_obs: np.ndarray, means: np.ndarray, std: float, distortion: float = 1.0) -> np.ndarray:
    """Distorted log posterior of the Gaussian mixture at the observations.

    Returns ``distortion * log p(k | x)`` where p is the uniform-prior
    posterior with isotropic class covariance std^2 I.
    """
    sq = ((x_obs[:, None, :] - means[None, :, :]) ** 2).sum(axis=2)
    scores = -sq / (2.0 * std * std)
    shifted = scores - scores.max(axis=1, keepdims=True)
    log_post = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    return distortion * log_post


def generate(spec: SynthSpec) -> tuple[PredictionSet, np.ndarray]:
    """Generate a labeled prediction set plus per-row true confidences.

    The emitted logits are the shift-unaware Bayes posterior scaled by the
    temperature distortion; the true confidence is the probability of the
    predicted class under the actual (shifted) generative model.
    """
    means = spec.means()
    ss = np.random.SeedSequence(spec.seed)
    pop_seq, noise_seq = ss.spawn(2)
    labels, x = draw_population(means, spec.within_class_std, spec.n, pop_seq)
    eps = np.random.default_rng(noise_seq).standard_normal((spec.n, spec.dim))
    x_obs = x + spec.shift_std * eps

    logits = posterior_logits(x_obs, means, spec.within_class_std, spec.temperature_distortion)
    preds = PredictionSet(logits, labels)

    total_std = float(np.sqrt(spec.within_class_std**2 + spec.shift_std**2))
    true_post = softmax(posterior_logits(x_obs, means, total_std))
    predicted = np.argmax(logits, axis=1)
    true_conf = true_post[np.arange(spec.n), predicted]
    return preds, true_conf
