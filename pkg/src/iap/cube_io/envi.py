"""ENVI-style header/raw rasters: hyperspectral cubes and label maps."""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import NumericError, ValidationError
from .atomic import atomic_write_bytes, atomic_write_text

# ENVI data type codes
DTYPE_CODES = {
    1: np.dtype("u1"), 2: np.dtype("i2"), 3: np.dtype("i4"), 4: np.dtype("f4"),
    5: np.dtype("f8"), 12: np.dtype("u2"), 13: np.dtype("u4"), 14: np.dtype("i8"),
}
DTYPE_NAMES = {"uint8": 1, "int16": 2, "int32": 3, "float32": 4, "float64": 5,
               "uint16": 12, "uint32": 13, "int64": 14}
CUBE_TYPES = {4, 5, 12}
LABEL_TYPES = {1, 2, 3, 12}
INTERLEAVES = ("bsq", "bil", "bip")


@dataclass(frozen=True)
class HyperCube:
    """W x H x D reflectance cube stored band-major as ``data[band, row, col]``."""

    data: np.ndarray
    wavelengths: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3 or min(data.shape) < 1:
            raise ValidationError("cube data must be a non-empty (bands, rows, cols) array")
        if not np.all(np.isfinite(data)):
            raise NumericError("cube contains non-finite values")
        if data is self.data and data.flags.writeable:
            data = data.copy()
        data.flags.writeable = False
        object.__setattr__(self, "data", data)
        if self.wavelengths is not None:
            wl = np.asarray(self.wavelengths, dtype=np.float64)
            if wl.shape != (data.shape[0],):
                raise ValidationError("one wavelength per band required")
            object.__setattr__(self, "wavelengths", wl)

    @property
    def bands(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def n_pixels(self) -> int:
        return self.height * self.width

    def pixels(self) -> np.ndarray:
        """(N, D) matrix, one row per pixel in row-major order."""
        return np.ascontiguousarray(self.data.reshape(self.bands, -1).T)

    def scaled(self, alpha: float) -> "HyperCube":
        return HyperCube(self.data * alpha, self.wavelengths)


@dataclass(frozen=True)
class LabelMap:
    """Per-pixel class ids (0 = unlabeled) plus the original->contiguous id map."""

    labels: np.ndarray
    class_map: dict = field(default_factory=dict)

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.int64)
        if lab.ndim != 2:
            raise ValidationError("label map must be 2-D")
        if lab.min(initial=0) < 0:
            raise ValidationError("negative class labels")
        lab = lab.copy()
        lab.flags.writeable = False
        object.__setattr__(self, "labels", lab)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def n_classes(self) -> int:
        return int(self.labels.max(initial=0))

    @property
    def n_labeled(self) -> int:
        return int(np.count_nonzero(self.labels))


# ---------------------------------------------------------------------------
# headers
# ---------------------------------------------------------------------------

def _norm_key(key):
    return re.sub(r"[\s_]+", "_", key.strip().lower())


def parse_header(text: str) -> dict:
    """Parse ``key = value`` / ``key: value`` lines; braces may span lines."""
    out = {}
    lines = iter(text.splitlines())
    for line in lines:
        line = line.strip()
        if not line or line.startswith(("#", ";")):
            continue
        m = re.match(r"([^=:]+?)\s*[=:]\s*(.*)$", line)
        if not m:
            continue
        key, val = _norm_key(m.group(1)), m.group(2).strip()
        if val.startswith("{"):
            while "}" not in val:
                try:
                    val += " " + next(lines).strip()
                except StopIteration:
                    raise ValidationError(f"unterminated brace in header key {key!r}") from None
            val = val[1:val.rindex("}")].strip()
        out[key] = val
    return out


def read_header(path) -> dict:
    return parse_header(Path(path).read_text())


def _header_int(hdr, key, path):
    try:
        return int(hdr[key])
    except KeyError:
        raise ValidationError(f"{path}: header lacks '{key}'") from None
    except ValueError:
        raise ValidationError(f"{path}: '{key}' is not an integer") from None


def _header_dtype(hdr, path, allowed):
    raw = hdr.get("data_type")
    if raw is None:
        raise ValidationError(f"{path}: header lacks 'data type'")
    code = DTYPE_NAMES.get(raw.lower()) if not raw.isdigit() else int(raw)
    if code not in allowed:
        raise ValidationError(f"{path}: unsupported element type {raw!r}")
    dt = DTYPE_CODES[code]
    big = hdr.get("byte_order", "0").strip() == "1"
    return dt.newbyteorder(">" if big else "<")


def _raw_for(header_path, raw_path):
    if raw_path is not None:
        return Path(raw_path)
    hp = Path(header_path)
    stem = hp.with_suffix("") if hp.suffix.lower() == ".hdr" else hp
    for cand in (stem, stem.with_suffix(".raw"), stem.with_suffix(".img"),
                 stem.with_suffix(".dat"), stem.with_suffix(".bsq")):
        if cand.exists() and cand != hp:
            return cand
    raise FileNotFoundError(f"no raw data file found next to {hp}")


def _read_raster(header_path, raw_path, allowed):
    hdr = read_header(header_path)
    w = _header_int(hdr, "samples", header_path)
    h = _header_int(hdr, "lines", header_path)
    d = int(hdr.get("bands", "1"))
    if min(w, h, d) < 1:
        raise ValidationError(f"{header_path}: non-positive raster dimensions")
    dt = _header_dtype(hdr, header_path, allowed)
    inter = hdr.get("interleave", "bsq").strip().lower()
    if inter not in INTERLEAVES:
        raise ValidationError(f"{header_path}: unknown interleave {inter!r}")
    offset = int(hdr.get("header_offset", "0"))
    raw = _raw_for(header_path, raw_path)
    expected = offset + w * h * d * dt.itemsize
    actual = os.path.getsize(raw)
    if actual != expected:
        raise ValidationError(
            f"{raw}: size mismatch, header implies {expected} bytes but file holds {actual}")
    flat = np.fromfile(raw, dtype=dt, offset=offset)
    if inter == "bsq":
        arr = flat.reshape(d, h, w)
    elif inter == "bil":
        arr = flat.reshape(h, d, w).transpose(1, 0, 2)
    else:
        arr = flat.reshape(h, w, d).transpose(2, 0, 1)
    return hdr, arr


def _parse_floats(s):
    return np.array([float(t) for t in re.split(r"[,\s]+", s.strip()) if t])


def load_cube(header_path, raw_path=None) -> HyperCube:
    """Load a cube in canonical band-major layout whatever the file interleave."""
    hdr, arr = _read_raster(header_path, raw_path, CUBE_TYPES)
    data = arr.astype(np.float64)
    if not np.all(np.isfinite(data)):
        raise NumericError(f"{header_path}: cube contains non-finite values")
    wl = None
    if "wavelength" in hdr:
        wl = _parse_floats(hdr["wavelength"])
        if wl.shape != (data.shape[0],):
            wl = None
    data.flags.writeable = False
    return HyperCube(data, wl)


def format_header(w, h, d, dtype_code, interleave="bsq", extra=None) -> str:
    lines = ["ENVI", f"samples = {w}", f"lines = {h}", f"bands = {d}",
             "header offset = 0", f"data type = {dtype_code}",
             f"interleave = {interleave}", "byte order = 0"]
    for k, v in (extra or {}).items():
        lines.append(f"{k} = {v}")
    return "\n".join(lines) + "\n"


def _default_raw(header_path):
    hp = Path(header_path)
    return hp.with_suffix(".raw") if hp.suffix.lower() == ".hdr" else Path(str(hp) + ".raw")


def save_cube(cube: HyperCube, header_path, raw_path=None, interleave="bsq", dtype="float64"):
    """Write header + raw payload (little-endian).  Returns the raw path."""
    interleave = interleave.lower()
    if interleave not in INTERLEAVES:
        raise ValidationError(f"unknown interleave {interleave!r}")
    code = DTYPE_NAMES.get(dtype)
    if code not in CUBE_TYPES:
        raise ValidationError(f"unsupported element type {dtype!r}")
    raw_path = Path(raw_path) if raw_path else _default_raw(header_path)
    arr = cube.data
    if interleave == "bil":
        arr = arr.transpose(1, 0, 2)
    elif interleave == "bip":
        arr = arr.transpose(1, 2, 0)
    payload = np.ascontiguousarray(arr).astype(DTYPE_CODES[code].newbyteorder("<")).tobytes()
    extra = {}
    if cube.wavelengths is not None:
        extra["wavelength"] = "{" + ", ".join(repr(float(x)) for x in cube.wavelengths) + "}"
    atomic_write_bytes(raw_path, payload)
    atomic_write_text(header_path, format_header(cube.width, cube.height, cube.bands,
                                                 code, interleave, extra))
    return raw_path


def reindex_labels(raw_labels):
    """Map the non-zero ids onto 1..C in ascending order; 0 stays 0."""
    raw_labels = np.asarray(raw_labels, dtype=np.int64)
    if raw_labels.min(initial=0) < 0:
        raise ValidationError("negative class labels")
    ids = np.unique(raw_labels[raw_labels > 0])
    mapping = {int(old): i + 1 for i, old in enumerate(ids)}
    lut = np.zeros(int(raw_labels.max(initial=0)) + 1, dtype=np.int64)
    for old, new in mapping.items():
        lut[old] = new
    return lut[raw_labels], mapping


def load_labels(header_path, raw_path=None, like: HyperCube | None = None,
                reindex: bool = True) -> LabelMap:
    """Load a single-band integer label raster and re-index its classes.

    With ``reindex=False`` ids are kept as stored (used for prediction maps).
    """
    _, arr = _read_raster(header_path, raw_path, LABEL_TYPES)
    if arr.shape[0] != 1:
        raise ValidationError(f"{header_path}: label raster must have exactly one band")
    raw = arr[0].astype(np.int64)
    if like is not None and raw.shape != (like.height, like.width):
        raise ValidationError(
            f"{header_path}: label raster is {raw.shape[1]}x{raw.shape[0]}, "
            f"cube is {like.width}x{like.height}")
    if not reindex:
        if raw.min(initial=0) < 0:
            raise ValidationError(f"{header_path}: negative class labels")
        ids = np.unique(raw[raw > 0]).tolist()
        return LabelMap(raw, {int(i): int(i) for i in ids})
    labels, mapping = reindex_labels(raw)
    return LabelMap(labels, mapping)


def save_labels(labels, header_path, raw_path=None, dtype="int32"):
    """Write an integer raster (labels, predictions or superpixel ids)."""
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise ValidationError("label raster must be 2-D")
    code = DTYPE_NAMES.get(dtype)
    if code not in LABEL_TYPES:
        raise ValidationError(f"unsupported label element type {dtype!r}")
    raw_path = Path(raw_path) if raw_path else _default_raw(header_path)
    payload = labels.astype(DTYPE_CODES[code].newbyteorder("<")).tobytes()
    atomic_write_bytes(raw_path, payload)
    atomic_write_text(header_path, format_header(labels.shape[1], labels.shape[0], 1, code))
    return raw_path
