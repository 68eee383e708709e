import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from guicrop.edges import (EdgeConfig, GradientField, InfoMatrix, detect_information, dilate,
                           direction_bins, equalize_adaptive, gaussian_kernel, gaussian_smooth,
                           hysteresis_threshold, non_max_suppress, sobel_gradients)
from guicrop.errors import BadThresholds, InvalidSigma, TooSmall
from guicrop.imaging import GrayImage, PixelImage

bit_matrices = arrays(np.uint8, st.tuples(st.integers(1, 24), st.integers(1, 24)),
                      elements=st.integers(0, 1))
gray_u8 = arrays(np.uint8, st.tuples(st.integers(1, 20), st.integers(1, 20)))


# ---- CLAHE

@pytest.mark.parametrize("value", [0, 37, 128, 255])
def test_clahe_constant_image(value):
    out = equalize_adaptive(GrayImage(np.full((40, 64), value, np.uint8))).data
    assert len(np.unique(out)) == 1


def test_clahe_two_levels_stay_ordered():
    img = np.zeros((64, 64), np.uint8)
    img[:, 32:] = 255
    out = equalize_adaptive(GrayImage(img)).data
    assert out[:, :32].max() < out[:, 32:].min()


def test_clahe_widens_low_contrast_ramp():
    rng = np.random.default_rng(11)
    ramp = np.tile(np.linspace(100, 120, 128), (96, 1))
    img = np.clip(ramp + rng.integers(-1, 2, ramp.shape), 100, 120).astype(np.uint8)
    out = equalize_adaptive(GrayImage(img)).data
    assert int(out.max()) - int(out.min()) > int(img.max()) - int(img.min())


def test_clahe_small_image_falls_back():
    img = np.arange(20, dtype=np.uint8).reshape(4, 5) * 10
    out = equalize_adaptive(GrayImage(img)).data
    assert out.shape == (4, 5)
    # Global equalization is monotone.
    order = np.argsort(img.ravel(), kind="stable")
    assert all(np.diff(out.ravel()[order].astype(int)) >= 0)


# ---- Gaussian

def test_gaussian_constant():
    out = gaussian_smooth(GrayImage(np.full((9, 13), 77, np.uint8)), 1.4).data
    assert (out == 77).all()


def test_gaussian_impulse_matches_dense_convolution():
    img = np.zeros((15, 15), np.uint8)
    img[7, 7] = 255
    got = gaussian_smooth(GrayImage(img), 1.4).data.astype(int)
    want = oracles.gaussian_2d(img, 1.4)
    assert np.abs(got - want).max() <= 1


def test_gaussian_random_matches_dense_convolution():
    img = np.random.default_rng(5).integers(0, 256, (12, 17), dtype=np.uint8)
    got = gaussian_smooth(GrayImage(img), 1.0).data.astype(int)
    assert np.abs(got - oracles.gaussian_2d(img, 1.0)).max() <= 1


def test_gaussian_kernel_normalized():
    for sigma in (0.5, 1.4, 3.0):
        k = gaussian_kernel(sigma)
        assert len(k) == 2 * math.ceil(3 * sigma) + 1
        assert abs(k.sum() - 1.0) < 1e-12


def test_gaussian_preserves_mass():
    img = np.zeros((31, 31), np.uint8)
    img[11:20, 11:20] = 200
    out = gaussian_smooth(GrayImage(img), 1.4).data
    mass = int(img.sum())
    assert abs(int(out.sum()) - mass) <= 0.005 * mass


@pytest.mark.parametrize("sigma", [0, -1.0])
def test_gaussian_rejects_bad_sigma(sigma):
    with pytest.raises(InvalidSigma):
        gaussian_smooth(GrayImage(np.zeros((5, 5), np.uint8)), sigma)


# ---- Sobel

def test_sobel_constant():
    g = sobel_gradients(GrayImage(np.full((6, 6), 90, np.uint8)))
    assert not g.gx.any() and not g.gy.any() and not g.magnitude.any()


def test_sobel_vertical_step():
    img = np.zeros((8, 8), np.uint8)
    img[:, 4:] = 200
    g = sobel_gradients(GrayImage(img))
    assert (np.abs(g.gx[:, 3]) == 800).all() and (np.abs(g.gx[:, 4]) == 800).all()
    assert not g.gx[:, [0, 1, 2, 5, 6, 7]].any()
    assert not g.gy.any()


@given(arrays(np.uint8, st.tuples(st.integers(3, 12), st.integers(3, 12))))
def test_sobel_transpose_swaps_axes(img):
    g = sobel_gradients(GrayImage(img))
    gt = sobel_gradients(GrayImage(np.ascontiguousarray(img.T)))
    assert np.array_equal(gt.gx, g.gy.T) and np.array_equal(gt.gy, g.gx.T)


def test_sobel_matches_loop_oracle():
    img = np.random.default_rng(2).integers(0, 256, (11, 14), dtype=np.uint8)
    g = sobel_gradients(GrayImage(img))
    gx, gy = oracles.sobel(img)
    assert np.array_equal(g.gx, gx) and np.array_equal(g.gy, gy)


def test_sobel_too_small():
    with pytest.raises(TooSmall):
        sobel_gradients(GrayImage(np.zeros((2, 9), np.uint8)))


def test_gradient_field_direction_range():
    gx = np.array([[-5, 0, 3, -1]], dtype=np.int16)
    gy = np.array([[0, 0, -3, -0]], dtype=np.int16)
    d = GradientField(gx, gy).direction
    assert ((d > -math.pi) & (d <= math.pi)).all()
    assert d[0, 0] == pytest.approx(math.pi)


# ---- NMS

def _field(gx, gy=None):
    gx = np.asarray(gx, dtype=np.int32)
    gy = np.zeros_like(gx) if gy is None else np.asarray(gy, dtype=np.int32)
    return GradientField(gx, gy)


def test_nms_single_ridge_preserved():
    gx = np.zeros((7, 9), np.int32)
    gx[:, 4] = 100
    out = non_max_suppress(_field(gx)).data
    assert (out[:, 4] == 100).all() and out.sum() == 100 * 7


@pytest.mark.parametrize("profile,kept", [
    ([10, 90, 100, 90, 10], [2]),      # peaked plateau
    ([10, 100, 100, 90, 10], [1, 2]),  # two-pixel tie at the top
    ([10, 90, 100, 100, 10], [2, 3]),
    ([10, 100, 90, 100, 10], [1, 3]),  # dip in the middle
])
def test_nms_three_wide_plateau_thins(profile, kept):
    gx = np.tile(np.array(profile, np.int32), (5, 1))
    out = non_max_suppress(_field(gx)).data
    assert [c for c in range(5) if out[2, c]] == kept
    assert len(kept) <= 2


def test_nms_flat_plateau_keeps_ties():
    # Equal neighbours all survive under the >= comparison.
    gx = np.tile(np.array([0, 100, 100, 100, 0], np.int32), (3, 1))
    out = non_max_suppress(_field(gx)).data
    assert [c for c in range(5) if out[1, c]] == [1, 2, 3]


def test_nms_all_zero():
    assert not non_max_suppress(_field(np.zeros((4, 4)))).data.any()


def test_nms_matches_loop_oracle():
    rng = np.random.default_rng(9)
    img = rng.integers(0, 256, (16, 16), dtype=np.uint8)
    g = sobel_gradients(GrayImage(img))
    got = non_max_suppress(g).data
    assert np.array_equal(got, oracles.nms(g.gx, g.gy))


def test_direction_bins():
    gx = np.array([10, 10, 0, -10, 10, -10])
    gy = np.array([0, 10, 10, 10, -10, 0])
    assert direction_bins(gx, gy).tolist() == [0, 1, 2, 3, 3, 0]


def test_nms_output_clamped():
    gx = np.zeros((3, 3), np.int32)
    gx[1, 1] = 1000
    assert non_max_suppress(_field(gx)).data[1, 1] == 255


# ---- hysteresis

def test_hysteresis_all_below_low():
    assert hysteresis_threshold(GrayImage(np.full((5, 5), 49, np.uint8))).ones() == 0


def test_hysteresis_all_strong():
    assert hysteresis_threshold(GrayImage(np.full((5, 5), 150, np.uint8))).ones() == 25


def test_hysteresis_weak_chain():
    v = np.zeros((9, 12), np.uint8)
    v[2, 1] = 200
    v[2, 2:7] = 80
    v[3, 7] = 80          # diagonal link
    v[4, 8] = 200
    v[7, 10] = 80         # isolated weak pixel
    m = hysteresis_threshold(GrayImage(v)).bits
    assert m[2, 1:7].all() and m[3, 7] and m[4, 8]
    assert m[7, 10] == 0
    assert m.sum() == 8


@given(arrays(np.uint8, st.tuples(st.integers(1, 16), st.integers(1, 16))),
       st.integers(1, 120), st.integers(1, 120))
def test_hysteresis_matches_flood_fill(v, low, gap):
    high = min(255, low + gap)
    cfg = EdgeConfig(hysteresis_low=low, hysteresis_high=high)
    got = hysteresis_threshold(GrayImage(v), cfg).bits
    assert np.array_equal(got, oracles.hysteresis(v, low, high))


@given(arrays(np.uint8, st.tuples(st.integers(1, 16), st.integers(1, 16))),
       st.integers(1, 100), st.integers(1, 60), st.integers(0, 40), st.integers(0, 40))
def test_hysteresis_monotone_in_thresholds(v, low, gap, dlow, dhigh):
    high = low + gap
    base = hysteresis_threshold(GrayImage(v), EdgeConfig(hysteresis_low=low, hysteresis_high=high))
    low2 = low + dlow
    high2 = max(high + dhigh, low2 + 1)
    if high2 > 255:
        return
    raised = hysteresis_threshold(GrayImage(v), EdgeConfig(hysteresis_low=low2,
                                                           hysteresis_high=high2))
    assert not (raised.bits & (1 - base.bits)).any()


def test_hysteresis_bad_thresholds():
    with pytest.raises(BadThresholds):
        EdgeConfig(hysteresis_low=150, hysteresis_high=150)

    class Loose:
        hysteresis_low, hysteresis_high = 90, 80
    with pytest.raises(BadThresholds):
        hysteresis_threshold(GrayImage(np.zeros((3, 3), np.uint8)), Loose())


# ---- dilation

def test_dilate_empty():
    assert dilate(InfoMatrix.zeros(6, 7), 1).ones() == 0


def test_dilate_single_point():
    bits = np.zeros((11, 11), np.uint8)
    bits[5, 5] = 1
    out = dilate(InfoMatrix(bits), 1).bits
    assert out[4:7, 4:7].all() and out.sum() == 9


def test_dilate_radius_two_is_two_steps():
    bits = (np.random.default_rng(4).random((32, 32)) < 0.05).astype(np.uint8)
    m = InfoMatrix(bits)
    assert dilate(m, 2) == dilate(dilate(m, 1), 1)


@given(bit_matrices, st.integers(0, 3), st.integers(0, 3))
def test_dilate_properties(bits, r, extra):
    m = InfoMatrix(bits)
    d = dilate(m, r)
    assert np.array_equal(d.bits, oracles.dilate(bits, r))
    assert not (bits & (1 - d.bits)).any()                      # extensive
    assert not (d.bits & (1 - dilate(m, r + extra).bits)).any()  # increasing in r
    assert dilate(dilate(m, r), extra) == dilate(m, r + extra)  # decomposition
    assert dilate(m, 0) == m


# ---- InfoMatrix serialization

@given(bit_matrices)
def test_pbm_roundtrip(bits):
    m = InfoMatrix(bits)
    assert InfoMatrix.from_pbm(m.to_pbm()) == m


@given(bit_matrices)
def test_rle_roundtrip(bits):
    m = InfoMatrix(bits)
    rle = m.to_rle()
    assert all(len(p) == 2 for p in rle)
    assert sum(a + b for a, b in rle) == bits.size
    assert sum(b for _, b in rle) == m.ones()
    assert InfoMatrix.from_rle(rle, m.rows, m.cols) == m


def test_rle_leading_zero_count():
    m = InfoMatrix(np.array([[1, 1, 0, 1]], np.uint8))
    assert m.to_rle() == [[0, 2], [1, 1]]


# ---- full detector

def test_detect_solid_is_empty():
    assert detect_information(PixelImage.solid(64, 48, (30, 90, 200))).ones() == 0


def test_detect_single_button():
    data = np.full((120, 200, 3), 255, np.uint8)
    border = np.zeros((120, 200), np.uint8)
    x0, y0, x1, y1 = 50, 40, 150, 80
    for t in range(2):
        border[y0 + t, x0:x1] = border[y1 - 1 - t, x0:x1] = 1
        border[y0:y1, x0 + t] = border[y0:y1, x1 - 1 - t] = 1
    data[border == 1] = 0
    cfg = EdgeConfig()
    m = detect_information(PixelImage(data), cfg)
    near = oracles.dilate(border, cfg.dilation_radius + 1)
    assert m.ones() > 0
    assert (m.bits & near).sum() / m.ones() >= 0.9
    interior = m.bits[y0 + 6:y1 - 6, x0 + 6:x1 - 6]
    assert interior.sum() == 0
    assert m.bits[:y0 - 6].sum() == 0


def test_detect_deterministic_and_shape(clustered_screen):
    img, _ = clustered_screen
    a = detect_information(img)
    b = detect_information(img)
    assert a == b
    assert (a.rows, a.cols) == (img.height, img.width)


def test_detect_finds_drawn_strokes(clustered_screen):
    img, gt = clustered_screen
    m = detect_information(img)
    near = oracles.dilate(gt.info_mask.bits, 3)
    assert (m.bits & near).sum() / m.ones() >= 0.95
