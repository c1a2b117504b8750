"""Library-level pipeline steps shared by the command-line tool."""

from __future__ import annotations

import contextlib
import json
import logging
import os
import shutil
import tempfile
from pathlib import Path

import numpy as np

from .classify import ForestParams, Metrics, evaluate, nn_classify, rf_classify
from .config import PipelineConfig
from .cube_io import (FeatureMatrix, HyperCube, LabelMap, SceneSpec, generate_synthetic,
                      load_cube, load_features, load_labels, load_samples,
                      samples_from_rasters, save_features)
from .errors import IapError, ValidationError
from .profile import IapConfig, IapResult, extract_iap, reduce

log = logging.getLogger(__name__)

CLASSIFIERS = ("nn", "rf")
FEATURE_FILES = {"OSF": "osf", "SIF": "sif", "FIF": "fif", "IAP": "iap", "REDUCED": "reduced"}


@contextlib.contextmanager
def staged_output(out):
    """Yield a scratch directory whose files are moved into ``out`` on success.

    On any exception the scratch directory is removed and ``out`` is left as
    it was.
    """
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))
    try:
        yield stage
        out.mkdir(parents=True, exist_ok=True)
        for src in sorted(stage.rglob("*")):
            if src.is_file():
                dst = out / src.relative_to(stage)
                dst.parent.mkdir(parents=True, exist_ok=True)
                os.replace(src, dst)
    finally:
        shutil.rmtree(stage, ignore_errors=True)


def load_inputs(cfg: PipelineConfig):
    """``(cube, truth LabelMap or None, SampleSet)`` from files or the synth recipe."""
    data = cfg.data
    if "cube" in data:
        cube = load_cube(data["cube"])
        truth = load_labels(data["labels"], like=cube) if "labels" in data else None
        if "samples" in data:
            samples = load_samples(data["samples"])
        elif "train_labels" in data and "test_labels" in data:
            tr = load_labels(data["train_labels"], like=cube)
            te = load_labels(data["test_labels"], like=cube)
            samples = samples_from_rasters(tr.labels, te.labels)
        else:
            raise ValidationError("data needs 'samples' or both 'train_labels' and 'test_labels'")
    else:
        cube, truth, samples = generate_synthetic(SceneSpec.from_dict(cfg.synth), cfg.seed)
    samples.check_bounds(cube.n_pixels)
    return cube, truth, samples


def stamp(fm: FeatureMatrix, h: str) -> FeatureMatrix:
    return FeatureMatrix(fm.values, fm.stage, h)


def run_extract(cube: HyperCube, cfg: PipelineConfig, reduce_to=None) -> IapResult:
    res = extract_iap(cube, cfg.iap, cfg.threads, reduce_to)
    h = cfg.hash()
    res.osf, res.sif, res.fif, res.iap = (stamp(m, h) for m in (res.osf, res.sif, res.fif, res.iap))
    if res.reduced is not None:
        res.reduced = stamp(res.reduced, h)
    return res


def write_features(res: IapResult, folder: Path):
    folder.mkdir(parents=True, exist_ok=True)
    for fm in (res.osf, res.sif, res.fif, res.iap, res.reduced):
        if fm is not None:
            save_features(fm, folder / FEATURE_FILES[fm.stage])
    meta = {"timings_s": res.timings,
            "grouping": res.grouping.assignment.tolist(),
            "superpixels": res.superpixels.n_segments,
            "widths": {fm.stage: fm.cols for fm in (res.osf, res.sif, res.fif, res.iap,
                                                     res.reduced) if fm is not None}}
    (folder / "extract.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def read_features(folder: Path, cfg: PipelineConfig, ablate=None, allow_raw=False,
                  input_stem=None) -> FeatureMatrix:
    """Matrix for classification, checking stage and provenance."""
    from .profile import assemble_iap

    def get(stage):
        fm = load_features(folder / FEATURE_FILES[stage])
        if fm.config_hash and fm.config_hash != cfg.hash():
            raise ValidationError(f"{folder / FEATURE_FILES[stage]}: features were extracted "
                                  "with a different configuration")
        return fm

    if input_stem is not None:
        fm = load_features(input_stem)
        if fm.stage != "REDUCED" and not allow_raw:
            raise ValidationError(f"{input_stem}: stage {fm.stage} is not REDUCED "
                                  "(pass --raw to classify it anyway)")
        return fm
    if ablate is None:
        return get("REDUCED")
    if ablate == "osf":
        return assemble_iap(get("OSF"), None, None)
    if ablate == "sif":
        return assemble_iap(get("OSF"), get("SIF"), None)
    if ablate == "fif":
        return assemble_iap(get("OSF"), None, get("FIF"))
    if ablate == "nodr":
        return get("IAP")
    raise ValidationError(f"unknown ablation {ablate!r}")


def classify_all(fm: FeatureMatrix, samples, forest: ForestParams, classifiers=CLASSIFIERS,
                 threads: int = 1, full_map: bool = True):
    """Train on the sample train split; returns ``{name: (Metrics, predictions)}``.

    With ``full_map`` predictions cover every pixel, otherwise only test rows.
    """
    x = fm.values
    if samples.train_index.max(initial=-1) >= fm.rows or samples.test_index.max(initial=-1) >= fm.rows:
        raise ValidationError("sample indices exceed the feature rows")
    tx, ty = x[samples.train_index], samples.train_labels
    test_rows = samples.test_index
    query = x if full_map else x[test_rows]
    out = {}
    for name in classifiers:
        if name == "nn":
            pred = nn_classify(tx, ty, query)
        elif name == "rf":
            pred = rf_classify(tx, ty, query, forest, threads)
        else:
            raise ValidationError(f"unknown classifier {name!r}")
        on_test = pred[test_rows] if full_map else pred
        out[name] = (evaluate(on_test, samples.test_labels), pred)
    return out


def sweep_grid(sweep: dict, iap: IapConfig) -> list:
    """Cells ``(radii, orders, d)`` of the configured grid (defaults from ``iap``)."""
    radii = sweep.get("radii", [list(iap.radii)])
    orders = sweep.get("orders", [list(iap.orders)])
    ds = sweep.get("d", [iap.d])
    if not radii or not orders or not ds:
        raise ValidationError("sweep grid is empty")
    return [(tuple(r), tuple(m), int(d)) for r in radii for m in orders for d in ds]


def run_sweep(cube, samples, cfg: PipelineConfig, classifiers=CLASSIFIERS, iap_fn=None):
    """OA per grid cell; a failing cell is recorded and the sweep continues.

    ``iap_fn(radii, orders)`` may supply the stacked IAP matrix directly.
    """
    rows = []
    cells = sweep_grid(cfg.sweep, cfg.iap)
    cache = {}
    for radii, orders, d in cells:
        cell = {"radii": list(radii), "orders": list(orders), "d": d}
        try:
            key = (radii, orders)
            if key not in cache:
                if iap_fn is not None:
                    cache[key] = iap_fn(radii, orders)
                else:
                    icfg = IapConfig(cfg.iap.n_g, radii, orders, cfg.iap.d, cfg.iap.slic,
                                     cfg.iap.seed, cfg.iap.ring_width)
                    cache[key] = extract_iap(cube, icfg, cfg.threads, reduce_to=0).iap
            red, _ = reduce(cache[key], d)
            res = classify_all(red, samples, cfg.forest, classifiers, cfg.threads,
                               full_map=False)
            for name, (m, _) in res.items():
                cell[f"OA_{name}"] = m.oa
                cell[f"AA_{name}"] = m.aa
                cell[f"kappa_{name}"] = m.kappa
            cell["status"] = "ok"
        except (IapError, ValueError, ArithmeticError) as exc:
            log.warning("sweep cell %s failed: %s", cell, exc)
            cell["status"] = "failed"
            cell["error"] = str(exc)
        rows.append(cell)
    return rows


def predictions_map(pred, shape) -> np.ndarray:
    return np.asarray(pred, np.int64).reshape(shape)


def metrics_payload(results: dict) -> dict[str, Metrics]:
    return {k: m for k, (m, _) in results.items()}


def truth_map(truth: LabelMap | None, samples, shape) -> np.ndarray:
    if truth is not None:
        return truth.labels
    lab = np.zeros(int(np.prod(shape)), np.int64)
    lab[samples.train_index] = samples.train_labels
    lab[samples.test_index] = samples.test_labels
    return lab.reshape(shape)
