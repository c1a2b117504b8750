"""Train/test sample manifests."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ValidationError
from .atomic import atomic_write_text


@dataclass(frozen=True)
class SampleSet:
    """Disjoint train/test lists of ``(pixel index, class id)`` rows."""

    train: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        for name in ("train", "test"):
            arr = np.asarray(getattr(self, name), dtype=np.int64).reshape(-1, 2)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if np.intersect1d(self.train[:, 0], self.test[:, 0]).size:
            raise ValidationError("train and test pixel sets overlap")
        missing = np.setdiff1d(self.test[:, 1], self.train[:, 1])
        if missing.size:
            raise ValidationError(f"test classes {missing.tolist()} have no training samples")
        if (self.train[:, 1] < 1).any() or (self.test[:, 1] < 1).any():
            raise ValidationError("sample class ids must be >= 1")

    @property
    def train_index(self):
        return self.train[:, 0]

    @property
    def train_labels(self):
        return self.train[:, 1]

    @property
    def test_index(self):
        return self.test[:, 0]

    @property
    def test_labels(self):
        return self.test[:, 1]

    def check_bounds(self, n_pixels: int):
        for arr in (self.train, self.test):
            if arr.size and (arr[:, 0].min() < 0 or arr[:, 0].max() >= n_pixels):
                raise ValidationError("sample pixel index outside the image")


def samples_from_rasters(train_map, test_map) -> SampleSet:
    """Build a SampleSet from two label rasters (0 = not a sample)."""
    tr = np.asarray(train_map).ravel()
    te = np.asarray(test_map).ravel()
    if tr.shape != te.shape:
        raise ValidationError("train and test rasters differ in size")
    i_tr = np.flatnonzero(tr)
    i_te = np.flatnonzero(te)
    return SampleSet(np.column_stack([i_tr, tr[i_tr]]), np.column_stack([i_te, te[i_te]]))


def save_samples(samples: SampleSet, path):
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["split", "pixel", "label"])
    for split, arr in (("train", samples.train), ("test", samples.test)):
        for pix, lab in arr:
            wr.writerow([split, int(pix), int(lab)])
    atomic_write_text(path, buf.getvalue())


def load_samples(path) -> SampleSet:
    """Read a ``split,pixel,label`` CSV manifest."""
    rows = {"train": [], "test": []}
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        if rd.fieldnames is None or not {"split", "pixel", "label"} <= set(rd.fieldnames):
            raise ValidationError(f"{path}: manifest needs split,pixel,label columns")
        for lineno, row in enumerate(rd, start=2):
            split = row["split"].strip().lower()
            if split not in rows:
                raise ValidationError(f"{path}:{lineno}: unknown split {row['split']!r}")
            try:
                rows[split].append((int(row["pixel"]), int(row["label"])))
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: non-integer pixel or label") from None
    if not rows["test"]:
        raise ValidationError(f"{Path(path)}: manifest has no test samples")
    if not rows["train"]:
        raise ValidationError(f"{Path(path)}: manifest has no training samples")
    return SampleSet(np.array(rows["train"]), np.array(rows["test"]))
