"""Spatial invariant features: isotropic filtering pooled over SLIC superpixels."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .cube_io import FeatureMatrix, HyperCube
from .errors import ValidationError
from .numerics import convolve2d, make_isotropic_kernel, pca_fit, pca_transform

DEFAULT_SEGMENT_AREA = 256


def extract_rcf(cube: HyperCube, radii, threads: int = 1) -> FeatureMatrix:
    """Per band, average the isotropic-triangle responses over all radii."""
    radii = [int(r) for r in radii]
    if not radii:
        raise ValidationError("extract_rcf needs at least one radius")
    kernels = [make_isotropic_kernel(r) for r in radii]

    def band(b):
        acc = convolve2d(cube.data[b], kernels[0])
        for k in kernels[1:]:
            acc = acc + convolve2d(cube.data[b], k)
        return acc / len(kernels) if len(kernels) > 1 else acc

    out = np.empty((cube.n_pixels, cube.bands))
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            for b, plane in enumerate(ex.map(band, range(cube.bands))):
                out[:, b] = plane.ravel()
    else:
        for b in range(cube.bands):
            out[:, b] = band(b).ravel()
    return FeatureMatrix(out, "SIF-RCF")


def pca3(cube: HyperCube) -> np.ndarray:
    """First three principal components as ``(3, H, W)`` planes scaled to [0, 1].

    A plane with no spread is returned as zeros.
    """
    if cube.bands < 3:
        raise ValidationError("pca3 needs at least 3 bands")
    x = cube.data.reshape(cube.bands, -1).T
    model = pca_fit(x, 3)
    z = pca_transform(model, x)
    planes = np.empty((3, cube.height, cube.width))
    for i in range(3):
        col = z[:, i]
        lo, hi = col.min(), col.max()
        span = hi - lo
        if span <= 1e-12 * max(1.0, abs(hi), abs(lo)):
            planes[i] = 0.0
        else:
            planes[i] = ((col - lo) / span).reshape(cube.height, cube.width)
    return planes


@dataclass(frozen=True)
class SlicParams:
    n_segments: int = 0           # 0 -> ceil(W*H / 256)
    compactness: float = 0.1
    max_iter: int = 10
    seed: int = 0                 # SLIC init is deterministic; kept for provenance

    def __post_init__(self):
        if self.n_segments < 0:
            raise ValidationError("n_segments must be >= 0 (0 = automatic)")
        if self.compactness <= 0:
            raise ValidationError("compactness must be > 0")
        if self.max_iter < 1:
            raise ValidationError("max_iter must be >= 1")

    def segments_for(self, n_pixels: int) -> int:
        return self.n_segments or math.ceil(n_pixels / DEFAULT_SEGMENT_AREA)


@dataclass(frozen=True)
class SuperpixelMap:
    labels: np.ndarray    # (H, W) ids 0..Q-1

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.int64)
        if lab.ndim != 2 or lab.size == 0:
            raise ValidationError("superpixel map must be a non-empty 2-D array")
        ids = np.unique(lab)
        if ids[0] != 0 or ids[-1] != len(ids) - 1:
            raise ValidationError("superpixel ids must be contiguous from 0")
        lab = lab.copy()
        lab.flags.writeable = False
        object.__setattr__(self, "labels", lab)

    @property
    def n_segments(self) -> int:
        return int(self.labels.max()) + 1

    @property
    def counts(self) -> np.ndarray:
        return np.bincount(self.labels.ravel(), minlength=self.n_segments)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


def _grid_centers(h, w, k):
    ny = min(h, max(1, round(math.sqrt(k * h / w))))
    nx = min(w, max(1, round(k / ny)))
    ys = [int((i + 0.5) * h / ny) for i in range(ny)]
    xs = [int((j + 0.5) * w / nx) for j in range(nx)]
    return [(y, x) for y in ys for x in xs]


def _gradient_energy(img):
    p = np.pad(img, ((0, 0), (1, 1), (1, 1)), mode="edge")
    gx = p[:, 1:-1, 2:] - p[:, 1:-1, :-2]
    gy = p[:, 2:, 1:-1] - p[:, :-2, 1:-1]
    return (gx * gx + gy * gy).sum(axis=0)


def _components(labels):
    """4-connected components of equal labels; comp id = smallest pixel index."""
    h, w = labels.shape
    comp = np.arange(h * w).reshape(h, w)
    same_h = labels[:, 1:] == labels[:, :-1]
    same_v = labels[1:, :] == labels[:-1, :]
    while True:
        new = comp.copy()
        np.minimum(new[:, 1:], np.where(same_h, comp[:, :-1], new[:, 1:]), out=new[:, 1:])
        np.minimum(new[:, :-1], np.where(same_h, comp[:, 1:], new[:, :-1]), out=new[:, :-1])
        np.minimum(new[1:, :], np.where(same_v, comp[:-1, :], new[1:, :]), out=new[1:, :])
        np.minimum(new[:-1, :], np.where(same_v, comp[1:, :], new[:-1, :]), out=new[:-1, :])
        flat = new.ravel()
        while True:
            jumped = flat[flat]
            if np.array_equal(jumped, flat):
                break
            flat = jumped
        new = flat.reshape(h, w)
        if np.array_equal(new, comp):
            return comp
        comp = new


def enforce_connectivity(labels):
    """Merge every fragment that is not the largest piece of its segment into
    the largest adjacent kept region, then renumber ids in raster order."""
    h, w = labels.shape
    comp = _components(labels).ravel()
    flat_lab = labels.ravel()
    roots, sizes = np.unique(comp, return_counts=True)
    size = dict(zip(roots.tolist(), sizes.tolist()))
    seg_of = {int(r): int(flat_lab[r]) for r in roots}

    main = {}
    for r in roots.tolist():
        s = seg_of[r]
        if s < 0:
            continue
        best = main.get(s)
        if best is None or size[r] > size[best]:
            main[s] = r
    kept = set(main.values())
    orphans = [r for r in roots.tolist() if r not in kept]

    parent = {}

    def find(c):
        while c in parent:
            c = parent[c]
        return c

    if orphans:
        cmap = comp.reshape(h, w)
        a = np.concatenate([cmap[:, :-1].ravel(), cmap[:-1, :].ravel()])
        b = np.concatenate([cmap[:, 1:].ravel(), cmap[1:, :].ravel()])
        diff = a != b
        a, b = a[diff], b[diff]
        orphan_set = set(orphans)
        adj = {o: set() for o in orphans}
        is_orph = np.zeros(h * w, bool)
        is_orph[orphans] = True
        for x, y in zip(a[is_orph[a]].tolist(), b[is_orph[a]].tolist()):
            adj[x].add(y)
        for x, y in zip(b[is_orph[b]].tolist(), a[is_orph[b]].tolist()):
            adj[x].add(y)
        pending = sorted(orphans)
        while pending:
            rest = []
            for o in pending:
                cands = {find(n) for n in adj[o]}
                cands = [c for c in cands if c in kept]
                if cands:
                    t = max(cands, key=lambda c: (size[c], -c))
                    parent[o] = t
                    size[t] += size[o]
                else:
                    rest.append(o)
            if len(rest) == len(pending):
                kept.add(rest[0])
                orphan_set.discard(rest[0])
                rest = rest[1:]
            pending = rest

    root_of = np.array([find(int(c)) for c in roots.tolist()])
    lut = np.empty(h * w, np.int64)
    lut[roots] = root_of
    final = lut[comp]
    _, first, inv = np.unique(final, return_index=True, return_inverse=True)
    rank = np.argsort(np.argsort(first))
    return rank[inv].reshape(h, w)


def slic(planes, params: SlicParams = SlicParams()) -> SuperpixelMap:
    """SLIC superpixels on a ``(C, H, W)`` feature image (C is usually 3 PCs).

    Distance is ``sqrt(d_color**2 + (d_xy / S)**2 * compactness**2)`` with
    ``S = sqrt(W*H/K)``; each centre searches a 2S x 2S window.
    """
    img = np.asarray(planes, dtype=np.float64)
    if img.ndim == 2:
        img = img[None]
    _, h, w = img.shape
    n = h * w
    k = params.segments_for(n)
    if k > n:
        raise ValidationError(f"K={k} superpixels exceed the {n} pixels")
    S = math.sqrt(n / k)
    centers = _grid_centers(h, w, k)
    if S >= 3:
        energy = _gradient_energy(img)
        moved = []
        for y, x in centers:
            y0, y1 = max(0, y - 1), min(h, y + 2)
            x0, x1 = max(0, x - 1), min(w, x + 2)
            win = energy[y0:y1, x0:x1]
            iy, ix = np.unravel_index(np.argmin(win), win.shape)
            moved.append((y0 + iy, x0 + ix))
        centers = moved

    cpos = np.array(centers, dtype=np.float64)
    ccol = np.stack([img[:, int(y), int(x)] for y, x in centers])
    half = int(math.ceil(S))
    spatial_w = (params.compactness / S) ** 2
    labels = np.full((h, w), -1, np.int64)
    for _ in range(params.max_iter):
        dist = np.full((h, w), np.inf)
        new = np.full((h, w), -1, np.int64)
        for c, ((cy, cx), col) in enumerate(zip(cpos, ccol)):
            y0, y1 = max(0, int(cy) - half), min(h, int(cy) + half + 1)
            x0, x1 = max(0, int(cx) - half), min(w, int(cx) + half + 1)
            if y0 >= y1 or x0 >= x1:
                continue
            patch = img[:, y0:y1, x0:x1]
            dc = ((patch - col[:, None, None]) ** 2).sum(axis=0)
            yy = np.arange(y0, y1)[:, None] - cy
            xx = np.arange(x0, x1)[None, :] - cx
            d = dc + (yy * yy + xx * xx) * spatial_w
            sub = dist[y0:y1, x0:x1]
            better = d < sub
            sub[better] = d[better]
            new[y0:y1, x0:x1][better] = c
        if np.array_equal(new, labels):
            break
        labels = new
        ok = labels.ravel() >= 0
        lab = labels.ravel()[ok]
        cnt = np.bincount(lab, minlength=len(cpos))
        have = cnt > 0
        rows, cols = np.divmod(np.flatnonzero(ok), w)
        cpos[have, 0] = np.bincount(lab, rows, len(cpos))[have] / cnt[have]
        cpos[have, 1] = np.bincount(lab, cols, len(cpos))[have] / cnt[have]
        flat = img.reshape(img.shape[0], -1)[:, ok]
        for ch in range(img.shape[0]):
            ccol[have, ch] = np.bincount(lab, flat[ch], len(cpos))[have] / cnt[have]
    return SuperpixelMap(enforce_connectivity(labels))


def aggregate(rcf, spmap: SuperpixelMap) -> FeatureMatrix:
    """Replace every row by the mean of its superpixel's rows.

    Means are taken about each segment's first row, so a segment whose rows
    are already equal is returned bit-for-bit unchanged.
    """
    x = rcf.values if isinstance(rcf, FeatureMatrix) else np.asarray(rcf, np.float64)
    lab = spmap.labels.ravel()
    if x.shape[0] != lab.size:
        raise ValidationError(
            f"feature rows ({x.shape[0]}) do not match superpixel map ({lab.size} pixels)")
    q = spmap.n_segments
    cnt = np.bincount(lab, minlength=q).astype(np.float64)
    _, first = np.unique(lab, return_index=True)
    ref = x[first]
    means = np.empty_like(ref)
    for j in range(x.shape[1]):
        dev = x[:, j] - ref[lab, j]
        means[:, j] = ref[:, j] + np.bincount(lab, dev, q) / cnt
    return FeatureMatrix(means[lab], "SIF")


def extract_sif(cube: HyperCube, radii, params: SlicParams = SlicParams(), threads: int = 1):
    """RCF pooled over SLIC superpixels of the first three PCs.

    Returns ``(FeatureMatrix, SuperpixelMap)``.
    """
    rcf = extract_rcf(cube, radii, threads)
    spmap = slic(pca3(cube), params)
    return aggregate(rcf, spmap), spmap
