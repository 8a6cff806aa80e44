"""File formats: prediction/feature CSVs, model JSON, reliability export.

Prediction files are CSV with header ``label,logit_0,...,logit_{K-1}``;
label -1 marks an unlabeled row. Feature files use ``feat_0..feat_{d-1}``
and align positionally with their prediction file. All writers emit a
trailing newline and replace the target atomically (never a partial file).
"""

from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from shiftcal.core import (
    UNLABELED,
    CalibrationModel,
    LadderEntrySummary,
    PredictionSet,
    SacLadderModel,
    TemperatureModel,
    VanillaModel,
)
from shiftcal.importance import FeatureSet
from shiftcal.metrics import BinnedReliability

MODEL_KINDS = ("vanilla", "temperature", "sac_ladder")


def _atomic_write_text(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parse_float(token: str, line_no: int) -> float:
    try:
        v = float(token)
    except ValueError:
        raise ValueError(f"line {line_no}: {token!r} is not a number") from None
    if not math.isfinite(v):
        raise ValueError(f"line {line_no}: non-finite value {token!r}")
    return v


def read_predictions(path) -> PredictionSet:
    """Strict parse of a prediction CSV; malformed rows report line numbers."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError("empty file: expected header label,logit_0,...") from None
        if len(header) < 3 or header[0] != "label" or any(
            h != f"logit_{i}" for i, h in enumerate(header[1:])
        ):
            raise ValueError('missing or malformed header: expected "label,logit_0,logit_1,..."')
        k = len(header) - 1
        labels: list[int] = []
        logits: list[list[float]] = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != k + 1:
                raise ValueError(f"line {line_no}: expected {k + 1} fields, got {len(row)}")
            try:
                label = int(row[0])
            except ValueError:
                raise ValueError(f"line {line_no}: label {row[0]!r} is not an integer") from None
            if label != UNLABELED and not (0 <= label < k):
                raise ValueError(f"line {line_no}: label {label} out of range [0, {k})")
            labels.append(label)
            logits.append([_parse_float(tok, line_no) for tok in row[1:]])
    if not logits:
        raise ValueError("prediction file contains no data rows")
    return PredictionSet(np.array(logits), np.array(labels))


def write_predictions(path, preds: PredictionSet) -> None:
    lines = ["label," + ",".join(f"logit_{i}" for i in range(preds.num_classes))]
    for label, row in zip(preds.labels, preds.logits):
        lines.append(str(int(label)) + "," + ",".join(repr(float(v)) for v in row))
    _atomic_write_text(path, "\n".join(lines) + "\n")


def read_features(path) -> FeatureSet:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError("empty file: expected header feat_0,...") from None
        if not header or any(h != f"feat_{i}" for i, h in enumerate(header)):
            raise ValueError('missing or malformed header: expected "feat_0,feat_1,..."')
        d = len(header)
        rows: list[list[float]] = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d:
                raise ValueError(f"line {line_no}: expected {d} fields, got {len(row)}")
            rows.append([_parse_float(tok, line_no) for tok in row])
    if not rows:
        raise ValueError("feature file contains no data rows")
    return FeatureSet(np.array(rows))


def write_features(path, feats: FeatureSet) -> None:
    lines = [",".join(f"feat_{i}" for i in range(feats.dim))]
    for row in feats.features:
        lines.append(",".join(repr(float(v)) for v in row))
    _atomic_write_text(path, "\n".join(lines) + "\n")


def _sig6(v: float) -> float:
    return float(f"{v:.6g}")


def model_to_dict(model: CalibrationModel) -> dict:
    if isinstance(model, VanillaModel):
        return {"kind": "vanilla"}
    if isinstance(model, TemperatureModel):
        return {
            "kind": "temperature",
            "temperature": _sig6(model.temperature),
            "objective": model.objective,
        }
    if isinstance(model, SacLadderModel):
        return {
            "kind": "sac_ladder",
            "entries": [
                {"tag": e.tag, "temperature": _sig6(e.temperature), "mean_pmax": _sig6(e.mean_pmax)}
                for e in model.entries
            ],
            "selected": model.selected,
        }
    raise TypeError(f"unknown model type {type(model).__name__}")


def model_from_dict(data: dict) -> CalibrationModel:
    if not isinstance(data, dict) or "kind" not in data:
        raise ValueError(f'model JSON must be an object with a "kind" among {MODEL_KINDS}')
    kind = data["kind"]
    if kind == "vanilla":
        return VanillaModel()
    if kind == "temperature":
        return TemperatureModel(
            temperature=float(data["temperature"]), objective=str(data.get("objective", "nll"))
        )
    if kind == "sac_ladder":
        entries = tuple(
            LadderEntrySummary(
                tag=str(e["tag"]),
                temperature=float(e["temperature"]),
                mean_pmax=float(e["mean_pmax"]),
            )
            for e in data["entries"]
        )
        selected = data.get("selected")
        return SacLadderModel(entries=entries, selected=None if selected is None else int(selected))
    raise ValueError(f"unknown model kind {kind!r}; supported kinds: {', '.join(MODEL_KINDS)}")


def write_model(path, model: CalibrationModel) -> None:
    _atomic_write_text(path, json.dumps(model_to_dict(model)) + "\n")


def read_model(path) -> CalibrationModel:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"invalid model JSON: {exc}") from None
    return model_from_dict(data)


def write_reliability(path, binned: BinnedReliability) -> None:
    """CSV export of per-bin reliability data for plotting."""
    lines = ["bin_index,count,lower_edge,upper_edge,accuracy,mean_confidence"]
    for i, b in enumerate(binned.bins):
        lines.append(
            f"{i},{b.count},{b.lower_edge:.6f},{b.upper_edge:.6f},{b.accuracy:.6f},{b.mean_confidence:.6f}"
        )
    _atomic_write_text(path, "\n".join(lines) + "\n")
