"""Command-line entry point: ``iap {synth,extract,classify,render,sweep,pipeline}``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

from . import pipeline as pl
from .classify import format_metrics, metrics_json
from .config import load_config
from .cube_io import load_labels, save_cube, save_labels, save_samples
from .errors import NumericError, ValidationError
from .render import save_map

log = logging.getLogger("iap")

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3


def _cfg(args):
    if not args.config:
        raise ValidationError(f"{args.cmd} needs --config")
    cfg = load_config(args.config)
    cfg = cfg.with_overrides(seed=args.seed, threads=args.threads, out=args.out)
    if cfg.out is None:
        raise ValidationError("no output directory: pass --out or set run.out")
    return cfg


def _write_predictions(stage: Path, results, shape):
    for name, (_, pred) in results.items():
        m = pl.predictions_map(pred, shape)
        save_labels(m, stage / f"pred_{name}.hdr")
        save_map(m, stage / f"map_{name}.png")
    metrics = pl.metrics_payload(results)
    (stage / "metrics.txt").write_text(format_metrics(metrics))
    (stage / "metrics.json").write_text(metrics_json(metrics))


def cmd_synth(args):
    cfg = _cfg(args)
    if cfg.synth is None:
        raise ValidationError("config has no [synth] section")
    cube, truth, samples = pl.load_inputs(cfg)
    with pl.staged_output(cfg.out) as stage:
        save_cube(cube, stage / "cube.hdr")
        save_labels(truth.labels, stage / "labels.hdr")
        save_samples(samples, stage / "samples.csv")
    print(f"wrote synthetic scene {cube.height}x{cube.width}x{cube.bands} to {cfg.out}")


def _extract(cfg, stage, cube):
    res = pl.run_extract(cube, cfg)
    pl.write_features(res, stage / "features")
    for name, t in res.timings.items():
        print(f"{name:8s} {t:8.3f} s")
    widths = " ".join(f"{fm.stage}={fm.cols}" for fm in
                      (res.osf, res.sif, res.fif, res.iap, res.reduced))
    print(f"widths: {widths}")
    return res


def cmd_extract(args):
    cfg = _cfg(args)
    cube, _, _ = pl.load_inputs(cfg)
    with pl.staged_output(cfg.out) as stage:
        _extract(cfg, stage, cube)


def cmd_classify(args):
    cfg = _cfg(args)
    cube, _, samples = pl.load_inputs(cfg)
    folder = Path(args.features) if args.features else cfg.out / "features"
    fm = pl.read_features(folder, cfg, args.ablate, args.raw, args.input)
    if fm.rows != cube.n_pixels:
        raise ValidationError(f"features have {fm.rows} rows but the cube has {cube.n_pixels} pixels")
    results = pl.classify_all(fm, samples, cfg.forest, threads=cfg.threads)
    with pl.staged_output(cfg.out) as stage:
        _write_predictions(stage, results, (cube.height, cube.width))
    print(format_metrics(pl.metrics_payload(results)), end="")


def cmd_render(args):
    if not args.labels:
        raise ValidationError("render needs --labels")
    if not args.out:
        raise ValidationError("render needs --out (PNG path)")
    lab = load_labels(args.labels, reindex=False)
    save_map(lab.labels, args.out)
    print(f"wrote {args.out}")


def cmd_sweep(args):
    cfg = _cfg(args)
    cube, _, samples = pl.load_inputs(cfg)
    classifiers = cfg.sweep.get("classifiers", list(pl.CLASSIFIERS))
    rows = pl.run_sweep(cube, samples, cfg, classifiers)
    keys = ["radii", "orders", "d", "status"] + [f"OA_{c}" for c in classifiers] + ["error"]
    buf = io.StringIO()
    wr = csv.DictWriter(buf, keys, extrasaction="ignore", lineterminator="\n")
    wr.writeheader()
    for r in rows:
        wr.writerow({**r, "radii": " ".join(map(str, r["radii"])),
                     "orders": " ".join(map(str, r["orders"]))})
    with pl.staged_output(cfg.out) as stage:
        (stage / "sweep.json").write_text(json.dumps(rows, indent=2) + "\n")
        (stage / "sweep.csv").write_text(buf.getvalue())
    print(buf.getvalue(), end="")


def cmd_pipeline(args):
    cfg = _cfg(args)
    cube, truth, samples = pl.load_inputs(cfg)
    shape = (cube.height, cube.width)
    with pl.staged_output(cfg.out) as stage:
        res = _extract(cfg, stage, cube)
        fm = res.final(args.ablate)
        results = pl.classify_all(fm, samples, cfg.forest, threads=cfg.threads)
        _write_predictions(stage, results, shape)
        save_map(pl.truth_map(truth, samples, shape), stage / "map_truth.png")
    print(format_metrics(pl.metrics_payload(results)), end="")


COMMANDS = {"synth": cmd_synth, "extract": cmd_extract, "classify": cmd_classify,
            "render": cmd_render, "sweep": cmd_sweep, "pipeline": cmd_pipeline}


def build_parser():
    p = argparse.ArgumentParser(prog="iap", description="Invariant attribute profiles for "
                                "hyperspectral classification")
    sub = p.add_subparsers(dest="cmd", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="TOML pipeline configuration")
        s.add_argument("--out", help="output directory (PNG path for render)")
        s.add_argument("--seed", type=int, help="override run.seed")
        s.add_argument("--threads", type=int, help="override run.threads")
        s.add_argument("-v", "--verbose", action="store_true")
        if name in ("classify", "pipeline"):
            s.add_argument("--ablate", choices=("osf", "sif", "fif", "nodr"))
        if name == "classify":
            s.add_argument("--raw", action="store_true",
                           help="accept a non-REDUCED --input matrix")
            s.add_argument("--features", help="feature folder (default <out>/features)")
            s.add_argument("--input", help="classify this feature stem instead")
        if name == "render":
            s.add_argument("--labels", help="label raster header to render")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.cmd](args)
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
