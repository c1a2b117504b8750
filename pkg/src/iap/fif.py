"""Frequency invariant features from polar Fourier representations of gradients.

For a group gradient ``D`` the order-``m`` field is ``|D| exp(-i m theta(D))``.
Pooling it with an angular ring kernel of order ``j`` gives a coefficient
whose value at a rotated pixel picks up the phase ``exp(-i (m + j) g)``
under a counter-clockwise image rotation by ``g``.  Three kinds of scalars
per group and pooling radius survive the rotation:

* part 1: ``|pool(F_m, j=0)|`` for every order,
* part 2: ``Re pool(F_m, j=-m)`` (the phase cancels),
* part 3: the normalized product of the ``(m, j) = (1, 2)`` coefficient at
  one radius with the conjugate of the same coefficient at the next radius
  (cyclically), whose phases cancel pairwise.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .cube_io import FeatureMatrix, HyperCube
from .errors import ValidationError
from .grouping import BandGrouping, GradientField, group_bands, max_gradient_field
from .numerics import Kernel2D, convolve2d, make_angular_kernel, make_isotropic_kernel

PART3_EPS = 1e-12


@dataclass(frozen=True)
class FourierField:
    group: int
    order: int
    plane: np.ndarray


def fourier_field(grad: GradientField, m: int) -> FourierField:
    """Closed form ``|D| exp(-i m theta)``; zero where the gradient vanishes."""
    if m < 0:
        raise ValidationError("Fourier order must be >= 0")
    mag = grad.magnitude
    if m == 0:
        return FourierField(grad.group, 0, mag.astype(np.complex128))
    nz = mag > 0
    ur = np.zeros_like(mag)
    ui = np.zeros_like(mag)
    ur[nz] = grad.dx[nz] / mag[nz]
    ui[nz] = -grad.dy[nz] / mag[nz]
    unit = ur + 1j * ui
    acc = unit
    for _ in range(m - 1):
        acc = acc * unit
    return FourierField(grad.group, m, mag * acc)


@lru_cache(maxsize=256)
def _ring(j: int, r: float, w: float) -> Kernel2D:
    return make_angular_kernel(j, r, w)


@lru_cache(maxsize=64)
def _disc(r: int) -> Kernel2D:
    return make_isotropic_kernel(r)


def regional_coeff(field: FourierField, j: int, r: float, w: float = 2.0) -> np.ndarray:
    """Pool a Fourier field with the order-``j`` ring kernel of radius ``r``."""
    return convolve2d(field.plane, _ring(j, float(r), float(w)))


def default_ring_width(radii) -> float:
    """Spacing between consecutive radii (2 for a single radius)."""
    rs = sorted(set(float(r) for r in radii))
    if len(rs) < 2:
        return 2.0
    return max(1.0, min(b - a for a, b in zip(rs, rs[1:])))


@dataclass(frozen=True)
class FifLayout:
    orders: tuple
    radii: tuple
    width: float | None = None

    def __post_init__(self):
        orders = tuple(int(m) for m in self.orders)
        radii = tuple(float(r) for r in self.radii)
        if len(orders) < 2:
            raise ValidationError("FIF needs at least two Fourier orders")
        if orders != tuple(range(len(orders))):
            raise ValidationError("Fourier orders must be 0..k-1")
        if not radii or min(radii) < 1:
            raise ValidationError("FIF needs radii >= 1")
        object.__setattr__(self, "orders", orders)
        object.__setattr__(self, "radii", radii)
        if self.width is None:
            object.__setattr__(self, "width", default_ring_width(radii))

    @property
    def k(self) -> int:
        return len(self.orders)

    @property
    def n_scales(self) -> int:
        return len(self.radii)

    @property
    def per_scale(self) -> int:
        return 2 * self.k + 1

    @property
    def per_group(self) -> int:
        return self.n_scales * self.per_scale

    def total_width(self, n_groups: int) -> int:
        return n_groups * self.per_group

    @property
    def part3_pair(self) -> tuple:
        """(field order, kernel order) coupled across radii."""
        return (1, 2) if self.k >= 3 else (self.k - 2, self.k - 1)

    def columns(self, n_groups: int) -> list:
        """``(group, scale, part, order)`` for every FIF column, in order."""
        cols = []
        m3 = self.part3_pair[0]
        for g in range(n_groups):
            for s in range(self.n_scales):
                cols += [(g, s, 1, m) for m in self.orders]
                cols += [(g, s, 2, m) for m in self.orders]
                cols.append((g, s, 3, m3))
        return cols


def _group_block(fields: dict, layout: FifLayout) -> np.ndarray:
    """Feature planes for one group: (per_group, H, W)."""
    w = layout.width
    m3, j3 = layout.part3_pair
    part3 = [regional_coeff(fields[m3], j3, r, w) for r in layout.radii]
    planes = []
    for s, r in enumerate(layout.radii):
        iso = [regional_coeff(fields[m], 0, r, w) for m in layout.orders]
        planes += [np.abs(c) for c in iso]
        for m in layout.orders:
            c = iso[0] if m == 0 else regional_coeff(fields[m], -m, r, w)
            planes.append(c.real.copy())
        a = part3[s]
        b = part3[(s + 1) % layout.n_scales]
        p = a * np.conj(b)
        planes.append(p.real / np.sqrt(np.abs(p) + PART3_EPS))
    return np.stack(planes)


def pwff_features(fields: list, layout: FifLayout, threads: int = 1) -> np.ndarray:
    """Assemble the FIF matrix from per-group ``{order: FourierField}`` dicts.

    Columns are group-major, then scale, then part; rows are pixels.
    """
    for fdict in fields:
        missing = set(layout.orders) - set(fdict)
        if missing:
            raise ValidationError(f"missing Fourier orders {sorted(missing)}")
    if threads > 1 and len(fields) > 1:
        with ThreadPoolExecutor(threads) as ex:
            blocks = list(ex.map(lambda f: _group_block(f, layout), fields))
    else:
        blocks = [_group_block(f, layout) for f in fields]
    stack = np.concatenate(blocks, axis=0)
    return stack.reshape(stack.shape[0], -1).T.copy()


def fourier_fields(grads: list, orders) -> list:
    return [{m: fourier_field(g, m) for m in orders} for g in grads]


def extract_fif(cube: HyperCube, n_g: int, layout: FifLayout, seed: int = 0,
                grouping: BandGrouping | None = None, threads: int = 1):
    """Group bands, build gradient fields and return ``(FeatureMatrix, grouping)``."""
    if grouping is None:
        grouping = group_bands(cube, n_g, seed)
    grads = max_gradient_field(cube, grouping)
    vals = pwff_features(fourier_fields(grads, layout.orders), layout, threads)
    return FeatureMatrix(vals, "FIF"), grouping


# ---------------------------------------------------------------------------
# baseline: hard-binned orientation histograms (not rotation invariant)
# ---------------------------------------------------------------------------

def orientation_histogram(grad: GradientField, radius: int, n_bins: int = 9) -> np.ndarray:
    """Magnitude-weighted, hard-assigned orientation bins pooled over a disc.

    Returns ``(n_bins, H, W)``.
    """
    theta = grad.phase
    mag = grad.magnitude
    idx = np.floor((theta + np.pi) / (2 * np.pi / n_bins)).astype(int) % n_bins
    kern = _disc(int(radius))
    return np.stack([convolve2d(np.where(idx == b, mag, 0.0), kern) for b in range(n_bins)])


def histogram_features(cube: HyperCube, grouping: BandGrouping, radii, n_bins: int = 9):
    """Baseline matrix: per group and radius, ``n_bins`` pooled histogram columns."""
    planes = []
    for grad in max_gradient_field(cube, grouping):
        for r in radii:
            planes.append(orientation_histogram(grad, int(r), n_bins))
    stack = np.concatenate(planes, axis=0)
    return stack.reshape(stack.shape[0], -1).T.copy()
