"""Deterministic synthetic scenes with rigidly transformed shape duplicates.

Original shapes become training samples; their shifted/rotated copies
become test samples, so a split measures how well features survive the
transform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError
from ..numerics import rng_stream
from .envi import HyperCube, LabelMap
from .samples import SampleSet

SHAPE_KINDS = ("rect", "disc", "triangle", "ell")


@dataclass(frozen=True)
class Shape:
    kind: str
    class_id: int
    top: int
    left: int
    height: int
    width: int
    # (period px, angle deg, amplitude): multiplicative stripe pattern
    texture: tuple | None = None


@dataclass(frozen=True)
class Transform:
    shape: int
    shift: tuple = (0, 0)     # (rows, cols)
    angle: float = 0.0        # degrees, counter-clockwise as displayed


@dataclass(frozen=True)
class SceneSpec:
    width: int
    height: int
    bands: int
    n_classes: int
    signatures: list
    shapes: list
    transforms: list = field(default_factory=list)
    noise: float = 0.0
    background: list | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        shapes = [Shape(s["kind"], int(s["class_id"]), int(s["top"]), int(s["left"]),
                        int(s["height"]), int(s["width"]),
                        tuple(s["texture"]) if s.get("texture") else None)
                  for s in d.get("shapes", [])]
        transforms = [Transform(int(t["shape"]), tuple(t.get("shift", (0, 0))),
                                float(t.get("angle", 0.0)))
                      for t in d.get("transforms", [])]
        return cls(int(d["width"]), int(d["height"]), int(d["bands"]), int(d["n_classes"]),
                   [list(map(float, s)) for s in d["signatures"]], shapes, transforms,
                   float(d.get("noise", 0.0)),
                   list(map(float, d["background"])) if d.get("background") else None)


def shape_patch(shape: Shape):
    """Boolean mask and multiplicative value template of a shape's bounding box."""
    h, w = shape.height, shape.width
    if h < 1 or w < 1:
        raise ValidationError("shape dimensions must be positive")
    r, c = np.mgrid[0:h, 0:w].astype(np.float64)
    if shape.kind == "rect":
        mask = np.ones((h, w), bool)
    elif shape.kind == "disc":
        cy, cx = (h - 1) / 2, (w - 1) / 2
        mask = ((r - cy) / (h / 2)) ** 2 + ((c - cx) / (w / 2)) ** 2 <= 1.0
    elif shape.kind == "triangle":
        mask = (c + 0.5) / w <= (r + 0.5) / h
    elif shape.kind == "ell":
        mask = (r >= h // 2) | (c < (w + 1) // 2)
    else:
        raise ValidationError(f"unknown shape kind {shape.kind!r}")
    tmpl = np.ones((h, w))
    if shape.texture:
        period, ang, amp = shape.texture
        a = math.radians(ang)
        tmpl = 1.0 + amp * np.sin(2 * np.pi * (c * math.cos(a) - r * math.sin(a)) / period)
    return mask, tmpl


def rotate_patch(mask, tmpl, angle):
    """Rotate a patch about its centre; exact for multiples of 90 degrees."""
    if angle % 90 == 0:
        k = int(angle // 90) % 4
        return np.rot90(mask, k).copy(), np.rot90(tmpl, k).copy()
    h, w = mask.shape
    g = math.radians(angle)
    cg, sg = math.cos(g), math.sin(g)
    hh = abs(h * cg) + abs(w * sg)
    ww = abs(w * cg) + abs(h * sg)
    H, W = int(math.ceil(hh - 1e-9)), int(math.ceil(ww - 1e-9))
    rr, cc = np.mgrid[0:H, 0:W].astype(np.float64)
    x = cc - (W - 1) / 2
    y = (H - 1) / 2 - rr
    x0 = x * cg + y * sg
    y0 = -x * sg + y * cg
    src_c = np.rint(x0 + (w - 1) / 2).astype(int)
    src_r = np.rint((h - 1) / 2 - y0).astype(int)
    inside = (src_r >= 0) & (src_r < h) & (src_c >= 0) & (src_c < w)
    out_mask = np.zeros((H, W), bool)
    out_tmpl = np.ones((H, W))
    out_mask[inside] = mask[src_r[inside], src_c[inside]]
    out_tmpl[inside] = tmpl[src_r[inside], src_c[inside]]
    return out_mask, out_tmpl


def _placements(spec: SceneSpec):
    """(instance is_duplicate, class id, top, left, mask, tmpl) in painting order."""
    out = []
    for s in spec.shapes:
        mask, tmpl = shape_patch(s)
        out.append((False, s.class_id, s.top, s.left, mask, tmpl))
    for t in spec.transforms:
        if not 0 <= t.shape < len(spec.shapes):
            raise ValidationError(f"transform refers to unknown shape {t.shape}")
        s = spec.shapes[t.shape]
        mask, tmpl = shape_patch(s)
        rmask, rtmpl = rotate_patch(mask, tmpl, t.angle)
        cy = s.top + (s.height - 1) / 2 + t.shift[0]
        cx = s.left + (s.width - 1) / 2 + t.shift[1]
        top = math.floor(cy - (rmask.shape[0] - 1) / 2)
        left = math.floor(cx - (rmask.shape[1] - 1) / 2)
        out.append((True, s.class_id, top, left, rmask, rtmpl))
    return out


def generate_synthetic(spec: SceneSpec, seed: int):
    """Render ``spec`` into ``(HyperCube, LabelMap, SampleSet)``."""
    C, D = spec.n_classes, spec.bands
    if C > len(spec.signatures):
        raise ValidationError(f"{C} classes but only {len(spec.signatures)} signatures")
    sig = np.array([list(s) for s in spec.signatures[:C]], dtype=np.float64)
    if sig.shape != (C, D):
        raise ValidationError("each signature needs one value per band")
    bg = np.zeros(D) if spec.background is None else np.asarray(spec.background, float)
    if bg.shape != (D,):
        raise ValidationError("background signature needs one value per band")

    H, W = spec.height, spec.width
    labels = np.zeros((H, W), np.int64)
    owner = np.full((H, W), -1, np.int64)
    tmpl_img = np.zeros((H, W))
    for inst, (dup, cid, top, left, mask, tmpl) in enumerate(_placements(spec)):
        if not 1 <= cid <= C:
            raise ValidationError(f"shape class id {cid} outside 1..{C}")
        h, w = mask.shape
        if top < 0 or left < 0 or top + h > H or left + w > W:
            raise ValidationError(f"shape instance {inst} exceeds the image bounds")
        win = (slice(top, top + h), slice(left, left + w))
        labels[win][mask] = cid
        owner[win][mask] = inst
        tmpl_img[win][mask] = tmpl[mask]

    data = np.broadcast_to(bg[:, None, None], (D, H, W)).copy()
    lab = labels > 0
    data[:, lab] = sig[labels[lab] - 1].T * tmpl_img[lab]
    if spec.noise > 0:
        data += spec.noise * rng_stream(seed, "synth").standard_normal((D, H, W))

    n_orig = len(spec.shapes)
    flat_owner = owner.ravel()
    flat_lab = labels.ravel()
    i_tr = np.flatnonzero((flat_owner >= 0) & (flat_owner < n_orig))
    i_te = np.flatnonzero(flat_owner >= n_orig)
    samples = SampleSet(np.column_stack([i_tr, flat_lab[i_tr]]),
                        np.column_stack([i_te, flat_lab[i_te]]))
    present = {int(c): int(c) for c in np.unique(flat_lab[flat_lab > 0])}
    return HyperCube(data), LabelMap(labels, present), samples
