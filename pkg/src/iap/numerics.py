"""Shared numerical core: standardization, PCA, k-means, kernels,
direct 2-D convolution and the image-rotation harness.

Image planes are ``(rows, cols)`` arrays.  Kernel offsets ``(v, u)`` are
(row, column) displacements, so ``u`` runs right and ``v`` runs down the
array.  Rotations by a positive angle are counter-clockwise as displayed,
which is what ``np.rot90`` does.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from .errors import NumericError, ValidationError

STD_EPS = 1e-12

_PAD_MODES = {"reflect": "symmetric", "zero": "constant"}


def rng_stream(seed: int, name: str) -> np.random.Generator:
    """Independent PCG64 stream derived from a master seed and a stream name."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, zlib.crc32(name.encode())])
    return np.random.Generator(np.random.PCG64(ss))


# ---------------------------------------------------------------------------
# standardization / PCA
# ---------------------------------------------------------------------------

def standardize(x, eps=STD_EPS):
    """Column-wise z-score.

    Returns ``(z, mean, std)``.  Columns whose population std is ``<= eps``
    come back as zeros.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValidationError("standardize needs a 2-D matrix with at least 2 rows")
    if not np.all(np.isfinite(x)):
        raise NumericError("standardize: non-finite input")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    ok = std > eps
    z = np.zeros_like(x)
    z[:, ok] = (x[:, ok] - mean[ok]) / std[ok]
    return z, mean, std


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray          # (F,)
    components: np.ndarray    # (F, d), orthonormal columns
    variances: np.ndarray     # (d,), non-increasing
    total_variance: float

    @property
    def n_components(self) -> int:
        return self.components.shape[1]

    @property
    def explained_variance_ratio(self) -> np.ndarray:
        if self.total_variance <= 0:
            return np.zeros_like(self.variances)
        return self.variances / self.total_variance


def _canonical_signs(vecs):
    # largest-magnitude entry of each column made positive (first index on ties)
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.where(vecs[idx, np.arange(vecs.shape[1])] < 0, -1.0, 1.0)
    return vecs * signs, idx


def pca_fit(x, d: int) -> PcaModel:
    """Fit PCA with ``d`` components from the F x F covariance of ``x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValidationError("pca_fit expects an (N, F) matrix")
    n, f = x.shape
    if n < 2:
        raise ValidationError("pca_fit needs N >= 2 rows")
    if not 1 <= d <= f:
        raise ValidationError(f"pca dimension d={d} out of range 1..{f}")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / (n - 1)
    del xc
    evals, evecs = np.linalg.eigh(cov)
    evals = np.clip(evals, 0.0, None)
    evecs, lead = _canonical_signs(evecs)
    order = sorted(range(f), key=lambda i: (-evals[i], lead[i]))[:d]
    return PcaModel(
        mean=mean,
        components=np.ascontiguousarray(evecs[:, order]),
        variances=evals[order].copy(),
        total_variance=float(np.trace(cov)),
    )


def pca_transform(model: PcaModel, x):
    return (np.asarray(x, dtype=np.float64) - model.mean) @ model.components


def pca_inverse(model: PcaModel, z):
    return np.asarray(z, dtype=np.float64) @ model.components.T + model.mean


# ---------------------------------------------------------------------------
# k-means
# ---------------------------------------------------------------------------

class KMeansResult(NamedTuple):
    labels: np.ndarray
    centroids: np.ndarray
    inertia: float
    history: list


def _sq_dists(x, c):
    out = np.empty((x.shape[0], c.shape[0]))
    for j in range(c.shape[0]):
        diff = x - c[j]
        out[:, j] = np.einsum("ij,ij->i", diff, diff)
    return out


def _kmeanspp(x, k, rng):
    n = x.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = _sq_dists(x, x[chosen])[:, 0]
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            raise ValidationError("k-means++ ran out of distinct points")
        nxt = int(rng.choice(n, p=d2 / total))
        chosen.append(nxt)
        d2 = np.minimum(d2, _sq_dists(x, x[[nxt]])[:, 0])
    return x[chosen].copy()


def kmeans(points, k: int, seed, max_iter: int = 100, tol: float = 1e-6) -> KMeansResult:
    """Lloyd's algorithm from k-means++ seeding.

    ``seed`` may be an int or a ``numpy.random.Generator``.  Empty clusters
    are refilled with the point farthest from its centroid, so every cluster
    ends non-empty.  ``history`` holds the inertia after every iteration.
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] == 0:
        raise ValidationError("kmeans: empty input")
    if k < 1:
        raise ValidationError("kmeans: k must be >= 1")
    if k > len(np.unique(x, axis=0)):
        raise ValidationError(f"kmeans: k={k} exceeds the number of distinct points")
    rng = seed if isinstance(seed, np.random.Generator) else rng_stream(seed, "kmeans")

    centroids = _kmeanspp(x, k, rng)
    history = []
    labels = None
    for _ in range(max_iter):
        dist = _sq_dists(x, centroids)
        labels = np.argmin(dist, axis=1)
        counts = np.bincount(labels, minlength=k)
        for empty in np.flatnonzero(counts == 0):
            own = dist[np.arange(len(x)), labels]
            own = np.where(counts[labels] > 1, own, -1.0)
            far = int(np.argmax(own))
            counts[labels[far]] -= 1
            labels[far] = empty
            counts[empty] = 1
        centroids = np.stack([x[labels == j].mean(axis=0) for j in range(k)])
        diff = x - centroids[labels]
        inertia = float(np.einsum("ij,ij->", diff, diff))
        history.append(inertia)
        if len(history) > 1:
            prev = history[-2]
            if prev - inertia <= tol * prev:
                break
        if inertia == 0.0:
            break
    return KMeansResult(labels, centroids, history[-1], history)


# ---------------------------------------------------------------------------
# kernels and convolution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Kernel2D:
    """Weights on the ``(2*radius+1)**2`` offset grid, centre at ``[radius, radius]``."""

    radius: int
    taps: np.ndarray
    order: int = 0
    ring: float | None = field(default=None, compare=False)

    def __post_init__(self):
        taps = np.asarray(self.taps)
        if taps.shape != (2 * self.radius + 1,) * 2:
            raise ValidationError("kernel taps do not match its radius")
        taps = taps.copy()
        taps.flags.writeable = False
        object.__setattr__(self, "taps", taps)

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.taps)


def _offset_grid(radius):
    v, u = np.mgrid[-radius:radius + 1, -radius:radius + 1]
    return v.astype(np.float64), u.astype(np.float64)


def make_isotropic_kernel(r: int) -> Kernel2D:
    """Radial triangle ``max(0, 1 - rho/(r+1))`` normalized to unit sum."""
    if r < 1:
        raise ValidationError("kernel radius must be >= 1")
    v, u = _offset_grid(r)
    taps = np.maximum(0.0, 1.0 - np.sqrt(u * u + v * v) / (r + 1))
    return Kernel2D(r, taps / taps.sum(), 0, float(r))


def _unit_phase_power(u, v, j):
    """``exp(i*j*atan2(v, u))`` by repeated multiplication; 0 at the origin."""
    rho = np.sqrt(u * u + v * v)
    z = np.zeros(u.shape, dtype=np.complex128)
    nz = rho > 0
    z[nz] = (u[nz] + 1j * v[nz]) / rho[nz]
    if j < 0:
        z = np.conj(z)
    out = np.where(nz, 1.0 + 0j, 0j)
    for _ in range(abs(j)):
        out = out * z
    return out


def make_angular_kernel(j: int, r: float, w: float = 2.0) -> Kernel2D:
    """Ring profile ``max(0, 1 - |rho - r|/w)`` times ``exp(i*j*phi)``.

    ``phi = atan2(v, u)`` in array offsets.  Normalized so the tap
    magnitudes sum to 1.  For ``j == 0`` the kernel is real.
    """
    if r < 1 or w < 1:
        raise ValidationError("angular kernel needs r >= 1 and w >= 1")
    radius = int(np.ceil(r + w)) - 1
    v, u = _offset_grid(radius)
    rho = np.sqrt(u * u + v * v)
    prof = np.maximum(0.0, 1.0 - np.abs(rho - r) / w)
    prof /= prof.sum()
    if j == 0:
        return Kernel2D(radius, prof, 0, float(r))
    return Kernel2D(radius, prof * _unit_phase_power(u, v, j), j, float(r))


def _as_kernel(kernel):
    if isinstance(kernel, Kernel2D):
        return kernel
    taps = np.asarray(kernel)
    if taps.ndim != 2 or taps.shape[0] != taps.shape[1] or taps.shape[0] % 2 == 0:
        raise ValidationError("kernel taps must be a square odd-sized array")
    return Kernel2D(taps.shape[0] // 2, taps)


def _rotation_symmetric(taps):
    return not np.iscomplexobj(taps) and np.array_equal(taps, np.rot90(taps))


def convolve2d(plane, kernel, boundary: str = "reflect"):
    """Direct correlation ``out[y, x] = sum taps[v, u] * plane[y+v, x+u]``.

    ``boundary`` is ``"reflect"`` (edge-inclusive mirror) or ``"zero"``.
    Taps are visited in a fixed order, so every output pixel is accumulated
    the same way regardless of how callers schedule planes.  Real kernels
    that are invariant under a quarter turn take a folded path that sums
    each 4-member offset orbit as two antipodal pairs; that path commutes
    bit-exactly with ``np.rot90``.
    """
    k = _as_kernel(kernel)
    taps = k.taps
    if not np.all(np.isfinite(taps)):
        raise NumericError("convolve2d: non-finite kernel taps")
    if boundary not in _PAD_MODES:
        raise ValidationError(f"unknown boundary policy {boundary!r}")
    plane = np.asarray(plane)
    if plane.ndim != 2:
        raise ValidationError("convolve2d expects a 2-D plane")
    if not np.iscomplexobj(plane):
        plane = plane.astype(np.float64, copy=False)
    R = k.radius
    h, w = plane.shape
    padded = np.pad(plane, R, mode=_PAD_MODES[boundary])

    def view(v, u):
        return padded[R + v:R + v + h, R + u:R + u + w]

    if _rotation_symmetric(taps):
        out = taps[R, R] * view(0, 0)
        for v in range(0, R + 1):
            for u in range(1, R + 1):
                wt = taps[R + v, R + u]
                if wt == 0:
                    continue
                s = (view(v, u) + view(-v, -u)) + (view(-u, v) + view(u, -v))
                out += wt * s
        return out

    dtype = np.result_type(plane.dtype, taps.dtype)
    out = np.zeros((h, w), dtype=dtype)
    for a in range(2 * R + 1):
        for b in range(2 * R + 1):
            wt = taps[a, b]
            if wt == 0:
                continue
            out += wt * padded[a:a + h, b:b + w]
    return out


# ---------------------------------------------------------------------------
# rotation harness
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RotationOp:
    angle: float
    interpolation: str = "exact"   # "exact" (multiples of 90 only) or "bilinear"

    def __post_init__(self):
        if self.interpolation not in ("exact", "bilinear"):
            raise ValidationError(f"unknown interpolation {self.interpolation!r}")
        if self.interpolation == "exact" and self.angle % 90 != 0:
            raise ValidationError("exact rotation needs a multiple of 90 degrees")


def rotate_plane(plane, op: RotationOp):
    """Rotate counter-clockwise (as displayed) about the image centre.

    Exact mode permutes pixels (shape swaps for odd quarter turns).
    Bilinear mode keeps the shape and samples the mirror extension outside
    the domain.
    """
    plane = np.asarray(plane)
    if op.interpolation == "exact":
        return np.rot90(plane, k=int(op.angle // 90) % 4).copy()
    if np.iscomplexobj(plane):
        return (rotate_plane(plane.real, op)
                + 1j * rotate_plane(plane.imag, op))
    h, w = plane.shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    g = np.deg2rad(op.angle)
    cg, sg = np.cos(g), np.sin(g)
    rows, cols = np.mgrid[0:h, 0:w].astype(np.float64)
    x = cols - cx
    y = cy - rows
    x0 = x * cg + y * sg
    y0 = -x * sg + y * cg
    coords = np.stack([cy - y0, cx + x0])
    return ndimage.map_coordinates(plane.astype(np.float64), coords, order=1,
                                   mode="reflect", prefilter=False)
