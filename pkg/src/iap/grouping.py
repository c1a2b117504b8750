"""Band grouping and per-group maximum-magnitude gradient fields."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cube_io import HyperCube
from .errors import ValidationError
from .numerics import kmeans, rng_stream, standardize

SUBSAMPLE_STEP = 4


@dataclass(frozen=True)
class BandGrouping:
    n_groups: int
    assignment: np.ndarray   # group id per band
    signature: np.ndarray    # (D, n_sub) clustered band descriptors

    def members(self, g: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == g)

    def as_sets(self):
        return {frozenset(self.members(g).tolist()) for g in range(self.n_groups)}


def _canonical_order(sub):
    return sorted(range(sub.shape[0]), key=lambda b: sub[b].tobytes())


def band_signatures(cube: HyperCube) -> np.ndarray:
    """Every 4th pixel (row-major) of each band, z-scored across bands.

    The z-scoring runs over bands in a canonical order so each signature is
    bit-identical whatever order the bands arrive in.
    """
    sub = cube.data.reshape(cube.bands, -1)[:, ::SUBSAMPLE_STEP]
    if cube.bands < 2:
        return np.zeros_like(sub)
    order = _canonical_order(sub)
    z = np.empty_like(sub)
    z[order] = standardize(sub[order])[0]
    return z


def group_bands(cube: HyperCube, n_g: int, seed: int) -> BandGrouping:
    """Cluster bands into ``n_g`` groups with k-means on their signatures.

    Bands are fed to k-means in a canonical order (sorted by their raw
    subsample bytes), so the partition does not depend on the band order of the file.
    Group ids are numbered by the lowest band index they contain.
    """
    D = cube.bands
    if not 1 <= n_g <= D:
        raise ValidationError(f"n_g={n_g} must lie in 1..{D}")
    sig = band_signatures(cube)
    if n_g == 1:
        return BandGrouping(1, np.zeros(D, np.int64), sig)
    order = _canonical_order(cube.data.reshape(D, -1)[:, ::SUBSAMPLE_STEP])
    res = kmeans(sig[order], n_g, rng_stream(seed, "grouping"))
    raw = np.empty(D, np.int64)
    raw[order] = res.labels
    # renumber groups by first band so ids are order-canonical
    first = {}
    for b in range(D):
        first.setdefault(int(raw[b]), len(first))
    assignment = np.array([first[int(g)] for g in raw], np.int64)
    return BandGrouping(n_g, assignment, sig)


@dataclass(frozen=True)
class GradientField:
    """Complex gradient ``D = dx + i*dy`` of one band group.

    ``dx`` is the derivative along columns, ``dy`` the upward derivative
    (against the row index), so angles are counter-clockwise as displayed.
    """

    group: int
    dx: np.ndarray
    dy: np.ndarray

    @property
    def complex(self) -> np.ndarray:
        return self.dx + 1j * self.dy

    @property
    def magnitude(self) -> np.ndarray:
        return np.sqrt(self.dx * self.dx + self.dy * self.dy)

    @property
    def phase(self) -> np.ndarray:
        th = np.arctan2(self.dy, self.dx)
        th[th == -np.pi] = np.pi
        return th


def central_gradients(plane):
    """Central differences with mirrored boundary; returns (dx, dy_up)."""
    p = np.pad(np.asarray(plane, dtype=np.float64), 1, mode="symmetric")
    dx = (p[1:-1, 2:] - p[1:-1, :-2]) / 2.0
    dy = (p[:-2, 1:-1] - p[2:, 1:-1]) / 2.0
    return dx, dy


def max_gradient_field(cube: HyperCube, grouping: BandGrouping) -> list[GradientField]:
    """Per pixel and group keep the gradient of the band with largest magnitude.

    Ties go to the lowest band index.
    """
    if grouping.assignment.shape != (cube.bands,):
        raise ValidationError("grouping does not match the cube's band count")
    fields = []
    for g in range(grouping.n_groups):
        best_dx = best_dy = best_mag = None
        for b in grouping.members(g):
            dx, dy = central_gradients(cube.data[b])
            mag = dx * dx + dy * dy
            if best_mag is None:
                best_dx, best_dy, best_mag = dx, dy, mag
                continue
            take = mag > best_mag
            best_dx = np.where(take, dx, best_dx)
            best_dy = np.where(take, dy, best_dy)
            best_mag = np.where(take, mag, best_mag)
        fields.append(GradientField(g, best_dx, best_dy))
    return fields
