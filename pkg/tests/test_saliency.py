import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from asitu.errors import DimensionError
from asitu.ingest import write_pgm
from asitu.saliency import attentive_region, binarize, center_prior, load_saliency, saliency_for_frame


def test_load_scaling(tmp_path):
    write_pgm(tmp_path / "w.pgm", np.full((6, 8), 255))
    write_pgm(tmp_path / "b.pgm", np.zeros((6, 8)))
    assert np.all(load_saliency(tmp_path / "w.pgm", (8, 6)) == 1.0)
    assert np.all(load_saliency(tmp_path / "b.pgm", (8, 6)) == 0.0)
    with pytest.raises(DimensionError):
        load_saliency(tmp_path / "w.pgm", (9, 6))


@pytest.mark.parametrize("dims", [(320, 240), (33, 17), (8, 8)])
def test_center_prior(dims):
    m = center_prior(dims)
    w, h = dims
    assert m.shape == (h, w)
    assert m.max() == 1.0
    cy, cx = np.unravel_index(np.argmax(m), m.shape)
    assert abs(cx - (w - 1) / 2) <= 0.5 and abs(cy - (h - 1) / 2) <= 0.5
    np.testing.assert_array_equal(m, m[:, ::-1])
    np.testing.assert_array_equal(m, m[::-1, :])


def test_binarize_cases():
    np.testing.assert_array_equal(binarize(np.array([0.4, 0.6]), 0.5), [0, 1])
    assert not binarize(np.zeros((4, 4))).any()
    assert binarize(np.array([0.5]), 0.5)[0] == 1
    with pytest.raises(ValueError):
        binarize(np.zeros(3), 1.5)


@given(arrays(np.float64, (6, 7), elements=st.floats(0, 1)), st.floats(0.01, 0.99))
def test_binarize_idempotent(smap, t):
    b = binarize(smap, t)
    np.testing.assert_array_equal(binarize(b, t), b)


def test_region_single_blob():
    mask = np.zeros((40, 40), dtype=np.uint8)
    mask[5:15, 5:15] = 1
    r = attentive_region(mask)
    assert r.bbox == (5, 5, 14, 14)
    assert not r.fallback


def test_region_largest_wins():
    mask = np.zeros((40, 40), dtype=np.uint8)
    mask[1:4, 1:4] = 1  # 9 px
    mask[20:25, 20:25] = 1  # 25 px
    assert attentive_region(mask).bbox == (20, 20, 24, 24)


def test_region_diagonal_not_connected():
    mask = np.zeros((10, 10), dtype=np.uint8)
    mask[2, 2] = mask[3, 3] = 1
    mask[6:8, 6] = 1
    assert attentive_region(mask).bbox == (6, 6, 6, 7)


def test_region_empty_fallback():
    r = attentive_region(np.zeros((12, 20)))
    assert r.bbox == (0, 0, 19, 11)
    assert r.fallback


@given(arrays(np.uint8, (9, 11), elements=st.integers(0, 1)))
@settings(max_examples=100)
def test_region_within_bounds(mask):
    r = attentive_region(mask)
    x0, y0, x1, y1 = r.bbox
    assert 0 <= x0 <= x1 < 11 and 0 <= y0 <= y1 < 9
    ys, xs = np.nonzero(r.mask)
    assert np.all((xs >= x0) & (xs <= x1) & (ys >= y0) & (ys <= y1))


def test_saliency_for_frame_file_and_prior(tmp_path):
    write_pgm(tmp_path / "saliency_0003.pgm", np.full((16, 20), 255))
    m, prior = saliency_for_frame(tmp_path, 3, (20, 16))
    assert not prior and m.min() == 1.0
    m, prior = saliency_for_frame(tmp_path, 4, (20, 16))
    assert prior
    np.testing.assert_array_equal(m, center_prior((20, 16)))
