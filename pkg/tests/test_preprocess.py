import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import bilinear_sample
from radiomap.preprocess import minmax_normalize, quantize, resize

finite = st.floats(-1e6, 1e6, allow_nan=False)
images = arrays(np.float64, st.tuples(st.integers(1, 12), st.integers(1, 12)), elements=finite)


@pytest.mark.parametrize(
    "values, expected",
    [
        ([[0, 5], [10, 10]], [[0, 0.5], [1, 1]]),
        ([[7, 7], [7, 7]], [[0, 0], [0, 0]]),
        ([[-2, 2]], [[0, 1]]),
    ],
)
def test_minmax_examples(values, expected):
    assert minmax_normalize(np.array(values)).tolist() == expected


def test_minmax_rejects_nonfinite():
    with pytest.raises(ValueError):
        minmax_normalize(np.array([[0.0, np.nan]]))


@given(images)
def test_minmax_idempotent(img):
    once = minmax_normalize(img)
    if np.ptp(img) > 0:
        assert np.array_equal(minmax_normalize(once), once)


@given(images)
def test_quantized_range_attains_endpoints(img):
    q = quantize(minmax_normalize(img))
    assert q.dtype == np.uint8
    if np.ptp(img) > 0:
        assert q.min() == 0 and q.max() == 255


@pytest.mark.parametrize("v, level", [(0.0, 0), (1.0, 255), (0.5, 128), (64 / 255, 64)])
def test_quantize_points(v, level):
    assert quantize(np.array([[v]]))[0, 0] == level


def test_quantize_rejects_out_of_range():
    with pytest.raises(ValueError):
        quantize(np.array([[1.5]]))


def test_resize_identity(rng):
    img = rng.normal(size=(7, 5))
    assert np.array_equal(resize(img, (5, 7), "bilinear"), img)
    assert np.array_equal(resize(img, (5, 7), "nearest"), img)


def test_resize_bilinear_single_pixel():
    # Single output pixel samples the source midpoint (0.5, 0.5).
    src = [[0, 1], [1, 1]]
    out = resize(np.array(src, dtype=float), (1, 1), "bilinear")
    assert out[0, 0] == bilinear_sample(src, 0.5, 0.5) == 0.75


def test_resize_bilinear_matches_scalar_oracle(rng):
    src = rng.normal(size=(6, 9))
    out = resize(src, (4, 11), "bilinear")
    for r in range(11):
        for c in range(4):
            y, x = r * (6 - 1) / (11 - 1), c * (9 - 1) / (4 - 1)
            assert out[r, c] == pytest.approx(bilinear_sample(src.tolist(), y, x), abs=1e-12)


def test_resize_bilinear_corners_align(rng):
    src = rng.normal(size=(5, 8))
    out = resize(src, (13, 3), "bilinear")
    for r, c, sr, sc in [(0, 0, 0, 0), (0, 12, 0, 7), (2, 0, 4, 0), (2, 12, 4, 7)]:
        assert out[r, c] == pytest.approx(src[sr, sc])


@given(arrays(np.uint8, st.tuples(st.integers(1, 10), st.integers(1, 10)), elements=st.integers(0, 1)),
       st.integers(1, 25), st.integers(1, 25))
def test_resize_nearest_keeps_masks_binary(mask, w, h):
    out = resize(mask, (w, h), "nearest")
    assert out.shape == (h, w)
    assert set(np.unique(out)) <= {0, 1}


@given(arrays(np.int64, st.tuples(st.integers(1, 8), st.integers(1, 8)), elements=st.integers(-50, 50)),
       st.integers(1, 4), st.integers(1, 4))
def test_resize_nearest_round_trip_for_integer_factors(img, ky, kx):
    h, w = img.shape
    up = resize(img, (w * kx, h * ky), "nearest")
    assert np.array_equal(resize(up, (w, h), "nearest"), img)


def test_resize_nearest_ties_go_to_smaller_index():
    # 3 -> 2 puts the output centers at source 0.25 and 1.75.
    src = np.array([[10, 20, 30]])
    assert resize(src, (2, 1), "nearest").tolist() == [[10, 30]]
    # 2 -> 1: the output center sits exactly between both sources.
    assert resize(np.array([[10, 20]]), (1, 1), "nearest").tolist() == [[10]]


def test_resize_zero_target():
    with pytest.raises(ValueError):
        resize(np.zeros((2, 2)), (0, 3))
