"""Stacking of spectral, spatial and frequency features plus PCA reduction."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .cube_io import FeatureMatrix, HyperCube
from .errors import ValidationError
from .fif import FifLayout, extract_fif
from .grouping import BandGrouping
from .numerics import PcaModel, pca_fit, pca_transform, standardize
from .sif import SlicParams, SuperpixelMap, extract_sif

log = logging.getLogger(__name__)

ABLATIONS = ("osf", "sif", "fif", "nodr")


@dataclass(frozen=True)
class IapConfig:
    n_g: int = 5
    radii: tuple = (2, 4, 6)
    orders: tuple = (0, 1, 2, 3)
    d: int = 30
    slic: SlicParams = field(default_factory=SlicParams)
    seed: int = 0
    ring_width: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "radii", tuple(int(r) for r in self.radii))
        object.__setattr__(self, "orders", tuple(int(m) for m in self.orders))
        if self.n_g < 1:
            raise ValidationError("n_g must be >= 1")
        if not self.radii or min(self.radii) < 1:
            raise ValidationError("radii must be a non-empty list of integers >= 1")
        if self.d < 1:
            raise ValidationError("d must be >= 1")
        self.layout  # validates orders

    @property
    def n_s(self) -> int:
        return len(self.radii)

    @property
    def layout(self) -> FifLayout:
        return FifLayout(self.orders, self.radii, self.ring_width)

    def widths(self, bands: int) -> dict:
        """Column counts of each block for a cube with ``bands`` bands."""
        fif = self.layout.total_width(self.n_g)
        return {"OSF": bands, "SIF": bands, "FIF": fif, "IAP": 2 * bands + fif}


def assemble_iap(osf: FeatureMatrix, sif: FeatureMatrix | None,
                 fif: FeatureMatrix | None) -> FeatureMatrix:
    """Standardize each block on its own, then stack ``[OSF | SIF | FIF]``.

    ``sif`` or ``fif`` may be None (or zero columns) to drop that block.
    """
    blocks = [b for b in (osf, sif, fif) if b is not None and b.cols > 0]
    rows = {b.rows for b in blocks}
    if len(rows) != 1:
        raise ValidationError(f"feature blocks have different row counts: {sorted(rows)}")
    z = [standardize(b.values)[0] for b in blocks]
    return FeatureMatrix(np.hstack(z), "IAP")


def reduce(iap: FeatureMatrix, d: int):
    """PCA on all rows down to ``d`` columns; returns ``(FeatureMatrix, PcaModel)``."""
    if not 1 <= d <= iap.cols:
        raise ValidationError(f"d={d} must lie in 1..{iap.cols}")
    model = pca_fit(iap.values, d)
    return FeatureMatrix(pca_transform(model, iap.values), "REDUCED", iap.config_hash), model


def column_map(bands: int, cfg: IapConfig) -> list:
    """Origin of every IAP column.

    OSF and SIF columns map to ``(block, band)``; FIF columns to
    ``("FIF", group, scale, part, order)``.
    """
    cols = [("OSF", b) for b in range(bands)]
    cols += [("SIF", b) for b in range(bands)]
    cols += [("FIF",) + c for c in cfg.layout.columns(cfg.n_g)]
    return cols


@dataclass
class IapResult:
    osf: FeatureMatrix
    sif: FeatureMatrix
    fif: FeatureMatrix
    iap: FeatureMatrix
    reduced: FeatureMatrix | None
    grouping: BandGrouping
    superpixels: SuperpixelMap
    pca: PcaModel | None
    timings: dict

    def final(self, ablate: str | None = None) -> FeatureMatrix:
        """Matrix handed to the classifiers for an ablation choice."""
        if ablate is None:
            if self.reduced is None:
                raise ValidationError("no reduced matrix was computed")
            return self.reduced
        if ablate == "osf":
            return assemble_iap(self.osf, None, None)
        if ablate == "sif":
            return assemble_iap(self.osf, self.sif, None)
        if ablate == "fif":
            return assemble_iap(self.osf, None, self.fif)
        if ablate == "nodr":
            return self.iap
        raise ValidationError(f"unknown ablation {ablate!r}; choose from {ABLATIONS}")


def extract_iap(cube: HyperCube, cfg: IapConfig, threads: int = 1,
                reduce_to: int | None = None) -> IapResult:
    """Run grouping, SIF, FIF, stacking and (optionally) PCA on one cube.

    ``reduce_to=0`` skips the PCA step; ``None`` uses ``cfg.d``.
    """
    timings = {}

    def timed(name, fn, *a, **kw):
        t0 = time.perf_counter()
        out = fn(*a, **kw)
        timings[name] = time.perf_counter() - t0
        log.info("stage %s: %.3f s", name, timings[name])
        return out

    osf = FeatureMatrix(cube.pixels(), "OSF")
    sif, spmap = timed("SIF", extract_sif, cube, cfg.radii, cfg.slic, threads)
    fif, grouping = timed("FIF", extract_fif, cube, cfg.n_g, cfg.layout, cfg.seed,
                          threads=threads)
    iap = timed("IAP", assemble_iap, osf, sif, fif)
    d = cfg.d if reduce_to is None else reduce_to
    reduced = model = None
    if d:
        reduced, model = timed("REDUCED", reduce, iap, d)
    return IapResult(osf, sif, fif, iap, reduced, grouping, spmap, model, timings)
