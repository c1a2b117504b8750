import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from iap.errors import NumericError, ValidationError
from iap.numerics import (Kernel2D, RotationOp, convolve2d, kmeans, make_angular_kernel,
                          make_isotropic_kernel, pca_fit, pca_inverse, pca_transform,
                          rng_stream, rotate_plane, standardize)


def loop_correlate(plane, taps, boundary="reflect"):
    """Quadruple loop: out[y,x] = sum_{v,u} taps[v,u] * P(y+v, x+u)."""
    h, w = plane.shape
    R = taps.shape[0] // 2

    def fetch(y, x):
        if boundary == "zero":
            return plane[y, x] if 0 <= y < h and 0 <= x < w else 0.0
        # edge-inclusive mirror: -1 -> 0, h -> h-1
        while not 0 <= y < h:
            y = -y - 1 if y < 0 else 2 * h - y - 1
        while not 0 <= x < w:
            x = -x - 1 if x < 0 else 2 * w - x - 1
        return plane[y, x]

    out = np.zeros((h, w), dtype=np.result_type(plane, taps))
    for y in range(h):
        for x in range(w):
            acc = 0
            for a in range(2 * R + 1):
                for b in range(2 * R + 1):
                    acc += taps[a, b] * fetch(y + a - R, x + b - R)
            out[y, x] = acc
    return out


# --- standardize -------------------------------------------------------------

def test_standardize_constant_column_is_zero():
    z, _, _ = standardize(np.array([[1.0], [1.0], [1.0]]))
    assert np.array_equal(z, np.zeros((3, 1)))


def test_standardize_two_values():
    z, _, _ = standardize(np.array([[0.0], [2.0]]))
    assert np.allclose(z[:, 0], [-1, 1], atol=0)


def test_standardize_random_moments():
    x = np.random.default_rng(1).standard_normal((5, 3)) * [1, 10, 0.1] + [3, -2, 7]
    z, _, _ = standardize(x)
    assert np.all(np.abs(z.mean(axis=0)) < 1e-12)
    assert np.all(np.abs(z.std(axis=0) - 1) < 1e-12)


def test_standardize_rejects_nonfinite():
    with pytest.raises(NumericError):
        standardize(np.array([[1.0], [np.nan]]))


# --- PCA ---------------------------------------------------------------------

def test_pca_line():
    t = np.linspace(-1, 1, 11)
    x = np.column_stack([t, t])
    m = pca_fit(x, 2)
    assert np.allclose(m.components[:, 0], [1 / np.sqrt(2), 1 / np.sqrt(2)], atol=1e-12)
    assert abs(m.variances[1]) < 1e-12


def test_pca_full_roundtrip():
    x = np.random.default_rng(2).standard_normal((40, 6)) @ np.diag([5, 3, 2, 1, 0.5, 0.1])
    m = pca_fit(x, 6)
    back = pca_inverse(m, pca_transform(m, x))
    assert np.linalg.norm(back - x) / np.linalg.norm(x) < 1e-8


def test_pca_square_cloud_tie():
    # covariance of the square {(+-1,+-1)} is (4/3) I: the two variances tie
    x = np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]])
    m = pca_fit(x, 2)
    assert np.allclose(m.variances, [4 / 3, 4 / 3], atol=1e-12)
    # each component's largest-|entry| is positive, and leads are in index order
    lead = np.argmax(np.abs(m.components), axis=0)
    assert list(lead) == sorted(lead)
    assert np.all(m.components[lead, [0, 1]] > 0)


def test_pca_orthonormal_and_uncorrelated():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((200, 8)) @ rng.standard_normal((8, 8))
    m = pca_fit(x, 8)
    assert np.max(np.abs(m.components.T @ m.components - np.eye(8))) < 1e-10
    assert np.all(np.diff(m.variances) <= 1e-12)
    z = pca_transform(m, x)
    c = np.cov(z, rowvar=False)
    off = c - np.diag(np.diag(c))
    assert np.max(np.abs(off)) < 1e-8 * np.max(np.abs(c))


def test_pca_rank5_ratio():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((300, 5)) @ rng.standard_normal((5, 40))
    m = pca_fit(x, 5)
    assert abs(m.explained_variance_ratio.sum() - 1) < 1e-10


def test_pca_d_out_of_range():
    with pytest.raises(ValidationError):
        pca_fit(np.ones((4, 2)), 3)


# --- k-means -----------------------------------------------------------------

def test_kmeans_two_points():
    res = kmeans(np.array([[0.0], [10.0]]), 2, 0)
    assert sorted(res.centroids[:, 0]) == [0.0, 10.0]
    assert res.inertia == 0.0


def test_kmeans_k1_is_mean():
    x = np.random.default_rng(5).standard_normal((30, 3))
    res = kmeans(x, 1, 0)
    assert np.allclose(res.centroids[0], x.mean(axis=0))
    assert np.isclose(res.inertia, x.var(axis=0).sum() * len(x))


def best_two_partition(x):
    """Exhaustive search over all 2-partitions for the minimum inertia."""
    n = len(x)
    best = (np.inf, None)
    for mask in itertools.product([0, 1], repeat=n - 1):
        lab = np.array((0,) + mask)
        if lab.min() == lab.max():
            continue
        cost = sum(((x[lab == g] - x[lab == g].mean(axis=0)) ** 2).sum() for g in (0, 1))
        if cost < best[0]:
            best = (cost, lab)
    return best


def test_kmeans_blobs_match_bruteforce():
    rng = np.random.default_rng(6)
    x = np.vstack([rng.normal(0, 0.3, (6, 2)), rng.normal(5, 0.3, (6, 2))])
    cost, lab = best_two_partition(x)
    res = kmeans(x, 2, 11)
    same = np.array_equal(res.labels, lab) or np.array_equal(res.labels, 1 - lab)
    assert same
    assert np.isclose(res.inertia, cost)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), k=st.integers(1, 5))
def test_kmeans_inertia_non_increasing(seed, k):
    x = np.random.default_rng(seed).standard_normal((40, 3))
    res = kmeans(x, k, seed)
    h = np.array(res.history)
    assert np.all(np.diff(h) <= 1e-9 * h[:-1])
    assert len(np.unique(res.labels)) == k


def test_kmeans_deterministic():
    x = np.random.default_rng(7).standard_normal((50, 4))
    a, b = kmeans(x, 3, 42), kmeans(x, 3, 42)
    assert np.array_equal(a.labels, b.labels) and np.array_equal(a.centroids, b.centroids)


def test_kmeans_errors():
    with pytest.raises(ValidationError):
        kmeans(np.zeros((0, 2)), 1, 0)
    with pytest.raises(ValidationError):
        kmeans(np.ones((3, 2)), 0, 0)
    with pytest.raises(ValidationError):
        kmeans(np.ones((3, 2)), 2, 0)


def test_rng_streams_are_named_and_reproducible():
    a = rng_stream(1, "grouping").standard_normal(4)
    assert np.array_equal(a, rng_stream(1, "grouping").standard_normal(4))
    assert not np.array_equal(a, rng_stream(1, "slic").standard_normal(4))


# --- kernels -----------------------------------------------------------------

def test_isotropic_kernel_r1():
    k = make_isotropic_kernel(1)
    assert k.taps.shape == (3, 3)
    assert np.all(k.taps >= 0)
    assert abs(k.taps.sum() - 1) < 1e-15
    assert k.taps[1, 1] == k.taps.max() and np.sum(k.taps == k.taps.max()) == 1


@pytest.mark.parametrize("r", [2, 4, 6])
def test_angular_j0_is_real_ring(r):
    k = make_angular_kernel(0, r, 2)
    assert not k.is_complex
    assert np.all(k.taps >= 0)
    assert abs(k.taps.sum() - 1) < 1e-12


def test_angular_j1_sums_to_zero():
    k = make_angular_kernel(1, 2, 2)
    assert abs(k.taps.sum()) < 1e-12
    assert abs(np.abs(k.taps).sum() - 1) < 1e-12


@pytest.mark.parametrize("j", [-3, -1, 1, 2, 4])
def test_angular_kernel_definition(j):
    r, w = 4.0, 2.0
    k = make_angular_kernel(j, r, w)
    R = k.radius
    v, u = np.mgrid[-R:R + 1, -R:R + 1]
    rho = np.hypot(u, v)
    prof = np.maximum(0, 1 - np.abs(rho - r) / w)
    expect = prof * np.exp(1j * j * np.arctan2(v, u))
    expect[R, R] = 0
    expect /= np.abs(expect).sum()
    assert np.max(np.abs(k.taps - expect)) < 1e-14
    assert k.taps[R, R] == 0


@pytest.mark.parametrize("j", [-2, -1, 1, 2, 3])
@pytest.mark.parametrize("quarter", [1, 2])
def test_steering_identity(j, quarter):
    """Rotating taps by g multiplies them by a unit phase of order j."""
    k = make_angular_kernel(j, 3, 2)
    g = quarter * np.pi / 2
    rotated = np.rot90(k.taps, quarter)
    # np.rot90 turns the offset grid by -g in the (u, v) array frame
    assert np.max(np.abs(rotated - np.exp(1j * j * g) * k.taps)) < 1e-14
    R = k.radius
    v, u = np.mgrid[-R:R + 1, -R:R + 1]
    # sample taps at coordinates rotated by +g in the array frame: K o T_g
    cu = np.rint(u * np.cos(g) - v * np.sin(g)).astype(int)
    cv = np.rint(u * np.sin(g) + v * np.cos(g)).astype(int)
    composed = k.taps[cv + R, cu + R]
    assert np.max(np.abs(composed - np.exp(1j * j * g) * k.taps)) < 1e-14


# --- convolution ---------------------------------------------------------------

@pytest.mark.parametrize("boundary", ["reflect", "zero"])
def test_convolve_matches_loop_real(boundary):
    rng = np.random.default_rng(8)
    p = rng.standard_normal((8, 8))
    k = make_isotropic_kernel(2)
    assert np.max(np.abs(convolve2d(p, k, boundary) - loop_correlate(p, k.taps, boundary))) <= 1e-12


def test_convolve_matches_loop_complex():
    rng = np.random.default_rng(9)
    p = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    k = make_angular_kernel(2, 2, 2)
    assert np.max(np.abs(convolve2d(p, k) - loop_correlate(p, k.taps))) <= 1e-12


def test_convolve_asymmetric_taps_matches_loop():
    rng = np.random.default_rng(10)
    p = rng.standard_normal((6, 9))
    taps = rng.standard_normal((5, 5))
    assert np.max(np.abs(convolve2d(p, taps) - loop_correlate(p, taps))) <= 1e-12


@settings(max_examples=25, deadline=None)
@given(p=arrays(np.float64, st.tuples(st.integers(1, 9), st.integers(1, 9)),
                elements=st.floats(-100, 100)),
       r=st.integers(1, 3))
def test_convolve_property_loop_oracle(p, r):
    """Small planes, including planes smaller than the kernel."""
    k = make_isotropic_kernel(r)
    ref = loop_correlate(p, k.taps)
    assert np.max(np.abs(convolve2d(p, k) - ref)) <= 1e-12 * max(1.0, np.abs(p).max())


def test_convolve_constant_plane():
    p = np.full((7, 5), 3.25)
    for k in (make_isotropic_kernel(3), make_angular_kernel(0, 4, 2)):
        assert np.allclose(convolve2d(p, k), 3.25, rtol=0, atol=1e-14)


def test_convolve_delta_sifting():
    p = np.zeros((15, 15))
    p[7, 7] = 1.0
    k = make_isotropic_kernel(3)
    out = convolve2d(p, k)
    # correlation places the flipped kernel at the delta; the kernel is symmetric
    assert np.array_equal(out[4:11, 4:11], k.taps[::-1, ::-1])


def test_convolve_linear():
    rng = np.random.default_rng(11)
    a, b = rng.standard_normal((2, 12, 12))
    k = make_angular_kernel(3, 2, 2)
    lhs = convolve2d(2.5 * a - 0.7 * b, k)
    rhs = 2.5 * convolve2d(a, k) - 0.7 * convolve2d(b, k)
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_convolve_rejects_nonfinite_taps():
    taps = np.ones((3, 3))
    taps[0, 0] = np.inf
    with pytest.raises(NumericError):
        convolve2d(np.ones((4, 4)), Kernel2D(1, taps))


@pytest.mark.parametrize("r", [1, 2, 4, 6])
@pytest.mark.parametrize("quarter", [1, 2, 3])
def test_isotropic_convolution_commutes_with_rot90(r, quarter):
    p = np.random.default_rng(12).standard_normal((21, 17))
    k = make_isotropic_kernel(r)
    lhs = np.rot90(convolve2d(p, k), quarter)
    rhs = convolve2d(np.rot90(p, quarter), k)
    assert np.array_equal(lhs, rhs)


# --- rotation harness ------------------------------------------------------------

def test_rotation_group_property():
    p = np.random.default_rng(13).standard_normal((5, 7))
    twice = rotate_plane(rotate_plane(p, RotationOp(90)), RotationOp(90))
    assert np.array_equal(twice, rotate_plane(p, RotationOp(180)))


def test_rotation_360_bilinear_identity():
    y, x = np.mgrid[0:32, 0:32] / 32.0
    p = np.sin(2 * x) + np.cos(3 * y)
    assert np.max(np.abs(rotate_plane(p, RotationOp(360, "bilinear")) - p)) < 1e-6


@pytest.mark.parametrize("angle", [10, 33, 90, 137])
def test_rotation_keeps_centre(angle):
    p = np.zeros((9, 9))
    p[4, 4] = 1.0
    assert rotate_plane(p, RotationOp(angle, "bilinear"))[4, 4] == pytest.approx(1.0, abs=1e-12)


def test_rotation_exact_requires_quarter_turns():
    with pytest.raises(ValidationError):
        RotationOp(45, "exact")


def test_bilinear_90_matches_exact_on_square():
    p = np.random.default_rng(14).standard_normal((10, 10))
    assert np.allclose(rotate_plane(p, RotationOp(90, "bilinear")),
                       rotate_plane(p, RotationOp(90)), atol=1e-12)
