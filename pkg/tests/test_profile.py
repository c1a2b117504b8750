import numpy as np
import pytest

from iap.cube_io import FeatureMatrix, HyperCube
from iap.errors import ValidationError
from iap.numerics import pca_inverse
from iap.profile import IapConfig, assemble_iap, column_map, extract_iap, reduce
from iap.sif import SlicParams


def fm(rows, cols, stage, seed=0):
    return FeatureMatrix(np.random.default_rng(seed).standard_normal((rows, cols)), stage)


@pytest.mark.parametrize("osf,fif,total", [(103, 135, 341), (144, 108, 396), (50, 84, 184)])
def test_stacked_widths(osf, fif, total):
    out = assemble_iap(fm(20, osf, "OSF"), fm(20, osf, "SIF", 1), fm(20, fif, "FIF", 2))
    assert out.cols == total and out.stage == "IAP"


def test_empty_fif_block_allowed():
    out = assemble_iap(fm(10, 5, "OSF"), fm(10, 5, "SIF"), FeatureMatrix(np.zeros((10, 0)), "FIF"))
    assert out.cols == 10
    assert assemble_iap(fm(10, 5, "OSF"), fm(10, 5, "SIF"), None).cols == 10


def test_blocks_standardized_independently():
    a = FeatureMatrix(np.random.default_rng(0).standard_normal((30, 2)) * 1000 + 5, "OSF")
    b = FeatureMatrix(np.random.default_rng(1).standard_normal((30, 3)) * 1e-3, "SIF")
    out = assemble_iap(a, b, None).values
    assert np.allclose(out.mean(axis=0), 0, atol=1e-12)
    assert np.allclose(out.std(axis=0), 1, atol=1e-12)


def test_row_mismatch():
    with pytest.raises(ValidationError):
        assemble_iap(fm(10, 2, "OSF"), fm(11, 2, "SIF"), None)


def test_reduce_full_width_invertible():
    x = fm(50, 6, "IAP")
    red, model = reduce(x, 6)
    assert red.stage == "REDUCED" and red.cols == 6
    assert np.max(np.abs(pca_inverse(model, red.values) - x.values)) < 1e-8


def test_reduce_d30_of_341():
    red, _ = reduce(fm(400, 341, "IAP"), 30)
    assert red.cols == 30


def test_reduce_rank5_explains_everything():
    rng = np.random.default_rng(2)
    x = FeatureMatrix(rng.standard_normal((200, 5)) @ rng.standard_normal((5, 40)), "IAP")
    _, model = reduce(x, 5)
    assert abs(model.explained_variance_ratio.sum() - 1) < 1e-10


def test_reduce_out_of_range():
    with pytest.raises(ValidationError):
        reduce(fm(10, 4, "IAP"), 5)
    with pytest.raises(ValidationError):
        reduce(fm(10, 4, "IAP"), 0)


def test_config_validation():
    with pytest.raises(ValidationError):
        IapConfig(orders=(0, 2, 3))
    with pytest.raises(ValidationError):
        IapConfig(radii=())
    assert IapConfig().n_s == 3


@pytest.mark.parametrize("bands,n_g,k", [(103, 5, 4), (144, 4, 4), (50, 4, 3), (7, 2, 2)])
def test_column_map_exhaustive(bands, n_g, k):
    cfg = IapConfig(n_g=n_g, orders=tuple(range(k)))
    cols = column_map(bands, cfg)
    assert len(cols) == cfg.widths(bands)["IAP"]
    # independent enumeration of the documented order
    expect = [("OSF", b) for b in range(bands)] + [("SIF", b) for b in range(bands)]
    p3 = 1 if k >= 3 else k - 2
    for g in range(n_g):
        for s in range(3):
            for m in range(k):
                expect.append(("FIF", g, s, 1, m))
            for m in range(k):
                expect.append(("FIF", g, s, 2, m))
            expect.append(("FIF", g, s, 3, p3))
    assert cols == expect
    assert len(set(cols)) == len(cols)


def test_extract_iap_end_to_end_widths():
    rng = np.random.default_rng(3)
    cube = HyperCube(rng.random((8, 32, 32)))
    cfg = IapConfig(n_g=2, d=10, slic=SlicParams(n_segments=8))
    res = extract_iap(cube, cfg)
    w = cfg.widths(8)
    assert (res.osf.cols, res.sif.cols, res.fif.cols, res.iap.cols) == \
        (8, 8, w["FIF"], w["IAP"])
    assert res.reduced.cols == 10
    assert set(res.timings) == {"SIF", "FIF", "IAP", "REDUCED"}
    assert res.final("osf").cols == 8 and res.final("sif").cols == 16
    assert res.final("fif").cols == 8 + w["FIF"] and res.final("nodr").cols == w["IAP"]
    with pytest.raises(ValidationError):
        res.final("bogus")
