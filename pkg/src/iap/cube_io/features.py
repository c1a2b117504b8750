"""Feature matrices and their sidecar + float64 payload persistence."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import NumericError, ValidationError
from .atomic import atomic_write_bytes, atomic_write_text

STAGES = ("OSF", "SIF-RCF", "SIF", "FIF", "IAP", "REDUCED")


@dataclass(frozen=True)
class FeatureMatrix:
    """N x F real feature table, one row per pixel."""

    values: np.ndarray
    stage: str
    config_hash: str = ""

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2:
            raise ValidationError("feature matrix must be 2-D")
        if self.stage not in STAGES:
            raise ValidationError(f"unknown stage tag {self.stage!r}")
        if not np.all(np.isfinite(vals)):
            raise NumericError(f"{self.stage} features contain non-finite values")
        object.__setattr__(self, "values", vals)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


def _paths(stem):
    stem = Path(stem)
    return stem.with_name(stem.name + ".json"), stem.with_name(stem.name + ".f64")


def save_features(fm: FeatureMatrix, stem):
    """Write ``<stem>.json`` (rows, cols, stage, config_hash) and ``<stem>.f64``."""
    side, payload = _paths(stem)
    atomic_write_bytes(payload, np.ascontiguousarray(fm.values, dtype="<f8").tobytes())
    meta = {"rows": fm.rows, "cols": fm.cols, "stage": fm.stage,
            "config_hash": fm.config_hash, "payload": payload.name,
            "dtype": "float64-le", "order": "row-major"}
    atomic_write_text(side, json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return side, payload


def load_features(stem) -> FeatureMatrix:
    side, payload = _paths(stem)
    meta = json.loads(side.read_text())
    for key in ("rows", "cols", "stage", "config_hash"):
        if key not in meta:
            raise ValidationError(f"{side}: sidecar lacks {key!r}")
    payload = side.parent / meta.get("payload", payload.name)
    rows, cols = int(meta["rows"]), int(meta["cols"])
    if os.path.getsize(payload) != rows * cols * 8:
        raise ValidationError(f"{payload}: payload size does not match {rows}x{cols}")
    vals = np.fromfile(payload, dtype="<f8").reshape(rows, cols)
    return FeatureMatrix(vals, meta["stage"], meta["config_hash"])
