"""TOML pipeline configuration with line-precise validation and a stable hash."""

from __future__ import annotations

import copy
import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .classify import ForestParams
from .errors import ValidationError
from .profile import IapConfig
from .sif import SlicParams

SCHEMA = {
    "data": {"cube": str, "samples": str, "labels": str, "train_labels": str,
             "test_labels": str},
    "iap": {"n_g": int, "radii": list, "orders": list, "d": int, "ring_width": (int, float)},
    "slic": {"n_segments": int, "compactness": (int, float), "max_iter": int},
    "forest": {"n_trees": int, "max_features": int, "min_leaf": int, "bootstrap": bool},
    "run": {"seed": int, "out": str, "threads": int},
    "synth": None,   # free-form scene description
    "sweep": {"radii": list, "orders": list, "d": list, "classifiers": list},
}
PATH_KEYS = ("cube", "samples", "labels", "train_labels", "test_labels")
UNHASHED = (("run", "out"), ("run", "threads"))


def _locate(text: str, section: str, key: str | None) -> int | None:
    """1-based line of ``key`` inside ``[section]`` (or of the header itself)."""
    current = None
    for no, line in enumerate(text.splitlines(), start=1):
        s = line.split("#", 1)[0].strip()
        m = re.match(r"^\[\s*([^\]]+?)\s*\]$", s)
        if m:
            current = m.group(1)
            if key is None and current == section:
                return no
            continue
        if current == section and key is not None and re.match(rf"^{re.escape(key)}\s*=", s):
            return no
    return None


@dataclass(frozen=True)
class PipelineConfig:
    source: Path | None
    raw: dict
    iap: IapConfig
    forest: ForestParams
    seed: int = 0
    threads: int = 1
    out: Path | None = None
    data: dict = field(default_factory=dict)
    synth: dict | None = None
    sweep: dict = field(default_factory=dict)

    def hash(self) -> str:
        return config_hash(self.raw)

    def with_overrides(self, seed=None, threads=None, out=None) -> "PipelineConfig":
        raw = copy.deepcopy(self.raw)
        run = raw.setdefault("run", {})
        if seed is not None:
            run["seed"] = int(seed)
        if threads is not None:
            run["threads"] = int(threads)
        if out is not None:
            run["out"] = str(Path(out).resolve())
        return build_config(raw, self.source)


def config_hash(raw: dict) -> str:
    canon = copy.deepcopy(raw)
    for sec, key in UNHASHED:
        canon.get(sec, {}).pop(key, None)
    canon = {k: v for k, v in canon.items() if v != {}}
    text = json.dumps(canon, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def _fail(text, path, section, key, msg):
    line = _locate(text, section, key) if text else None
    where = f"{path}:{line}" if line else f"{path or '<config>'}"
    label = f"[{section}]" + (f" {key}" if key else "")
    raise ValidationError(f"{where}: {label}: {msg}")


def _check_types(raw: dict, text: str, path):
    for section, body in raw.items():
        if section not in SCHEMA:
            _fail(text, path, section, None, "unknown section")
        if not isinstance(body, dict):
            _fail(text, path, section, None, "must be a table")
        spec = SCHEMA[section]
        if spec is None:
            continue
        for key, val in body.items():
            if key not in spec:
                _fail(text, path, section, key, "unknown key")
            want = spec[key]
            ok = isinstance(val, want) and not (want is int and isinstance(val, bool))
            if not ok:
                _fail(text, path, section, key, f"expected {getattr(want, '__name__', 'number')}")


def build_config(raw: dict, source: Path | None = None, text: str = "") -> PipelineConfig:
    """Validate a parsed config dict; ``text`` enables line numbers in errors."""
    path = str(source) if source else "<config>"
    _check_types(raw, text, path)
    raw = copy.deepcopy(raw)
    base = source.parent if source else Path.cwd()
    data = raw.get("data", {})
    for k in PATH_KEYS:
        if k in data:
            data[k] = str((base / data[k]).resolve())
    run = raw.get("run", {})
    if "out" in run:
        run["out"] = str((base / run["out"]).resolve())
    if "cube" not in data and "synth" not in raw:
        _fail(text, path, "data", None, "need data.cube or a [synth] section")

    def section(name, fn):
        try:
            return fn()
        except (ValidationError, TypeError) as exc:
            key = None
            m = re.search(r"\b(n_g|radii|orders|d|ring_width|n_segments|compactness|max_iter|"
                          r"n_trees|max_features|min_leaf|seed|threads)\b", str(exc))
            if m and m.group(1) in raw.get(name, {}):
                key = m.group(1)
            _fail(text, path, name, key, str(exc))

    sl = raw.get("slic", {})
    slic = section("slic", lambda: SlicParams(**sl))
    ic = raw.get("iap", {})
    seed = run.get("seed", 0)
    iap = section("iap", lambda: IapConfig(slic=slic, seed=seed, **ic))
    fr = raw.get("forest", {})
    forest = section("forest", lambda: ForestParams(seed=seed, **fr))
    threads = run.get("threads", 1)
    if threads < 1:
        _fail(text, path, "run", "threads", "must be >= 1")
    return PipelineConfig(source, raw, iap, forest, seed, threads,
                          Path(run["out"]) if "out" in run else None,
                          data, raw.get("synth"), raw.get("sweep", {}))


def load_config(path) -> PipelineConfig:
    path = Path(path)
    text = path.read_text()
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    return build_config(raw, path.resolve(), text)
