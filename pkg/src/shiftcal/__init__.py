"""Black-box post-hoc calibration of classifiers under distribution shift.

Fits temperature-based calibrators from prediction files, selects or pools
surrogate calibration sets to adapt to an unlabeled shifted test set, and
measures Top-1 expected calibration error with equal-mass binning.
"""

from shiftcal.core import (
    UNLABELED,
    CalibrationModel,
    LadderEntrySummary,
    PredictionSet,
    ProbabilityRow,
    SacLadderModel,
    TemperatureModel,
    VanillaModel,
    apply_model,
    model_probs,
    model_temperature,
    softmax,
)
from shiftcal.metrics import BinnedReliability, ReliabilityBin, bin_equal_mass, brier, ece, nll
from shiftcal.scaling import TemperatureFit, fit_temperature
from shiftcal.surrogate import (
    SurrogateLadder,
    build_ladder,
    dist_ks,
    dist_mean,
    dist_w1,
    sac_select,
    sts_fit,
)

__all__ = [
    "UNLABELED",
    "BinnedReliability",
    "CalibrationModel",
    "LadderEntrySummary",
    "PredictionSet",
    "ProbabilityRow",
    "ReliabilityBin",
    "SacLadderModel",
    "SurrogateLadder",
    "TemperatureFit",
    "TemperatureModel",
    "VanillaModel",
    "apply_model",
    "bin_equal_mass",
    "brier",
    "build_ladder",
    "dist_ks",
    "dist_mean",
    "dist_w1",
    "ece",
    "fit_temperature",
    "model_probs",
    "model_temperature",
    "nll",
    "sac_select",
    "softmax",
    "sts_fit",
]
