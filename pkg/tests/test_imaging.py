import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from guicrop.errors import InvalidTarget, OutOfBounds
from guicrop.imaging import (GrayImage, PixelImage, Rect, bilinear_resize, crop_rect,
                             to_grayscale)

rgb_images = arrays(np.uint8, st.tuples(st.integers(1, 12), st.integers(1, 12), st.just(3)))


def test_white_stays_white():
    assert (to_grayscale(PixelImage.solid(5, 4, (255, 255, 255))).data == 255).all()


def test_pure_red_luma():
    assert to_grayscale(PixelImage.solid(1, 1, (255, 0, 0))).data[0, 0] == 76


def test_luma_matches_scalar_oracle():
    rng = np.random.default_rng(7)
    data = rng.integers(0, 256, (8, 8, 3), dtype=np.uint8)
    got = to_grayscale(PixelImage(data)).data
    want = [[oracles.luma(*map(int, data[y, x])) for x in range(8)] for y in range(8)]
    assert got.tolist() == want


def test_luma_exhaustive_half_cases():
    # Every (R, G, B) triple whose weighted sum lands on .5 exactly.
    rng = np.random.default_rng(1)
    data = rng.integers(0, 256, (64, 64, 3), dtype=np.uint8)
    got = to_grayscale(PixelImage(data)).data
    acc = data.astype(np.int64) @ np.array([299, 587, 114])
    assert np.array_equal(got, (acc + 500) // 1000)


@given(arrays(np.uint8, st.tuples(st.integers(1, 10), st.integers(1, 10))))
def test_gray_input_is_fixed_point(g):
    img = PixelImage(np.repeat(g[..., None], 3, axis=2))
    assert np.array_equal(to_grayscale(img).data, g)


def test_full_crop_is_copy():
    img = PixelImage(np.arange(4 * 5 * 3, dtype=np.uint8).reshape(4, 5, 3))
    assert crop_rect(img, Rect(0, 0, 5, 4)) == img


def test_single_pixel_crop():
    img = PixelImage(np.arange(4 * 5 * 3, dtype=np.uint8).reshape(4, 5, 3))
    assert crop_rect(img, Rect(0, 0, 1, 1)).data.tolist() == [[[0, 1, 2]]]


def test_crop_out_of_bounds():
    with pytest.raises(OutOfBounds):
        crop_rect(PixelImage.solid(5, 4), Rect(3, 0, 3, 2))


@given(rgb_images, st.data())
def test_crop_composition(data_arr, data):
    img = PixelImage(data_arr)
    h, w = data_arr.shape[:2]
    ax = data.draw(st.integers(0, w - 1))
    ay = data.draw(st.integers(0, h - 1))
    a = Rect(ax, ay, data.draw(st.integers(1, w - ax)), data.draw(st.integers(1, h - ay)))
    bx = data.draw(st.integers(0, a.w - 1))
    by = data.draw(st.integers(0, a.h - 1))
    b = Rect(bx, by, data.draw(st.integers(1, a.w - bx)), data.draw(st.integers(1, a.h - by)))
    assert crop_rect(crop_rect(img, a), b) == crop_rect(img, a.offset(b))


def test_resize_constant():
    out = bilinear_resize(PixelImage.solid(7, 3, (10, 200, 30)), 19, 11)
    assert out.width == 19 and out.height == 11
    assert (out.data == np.array([10, 200, 30], dtype=np.uint8)).all()


def test_resize_two_pixel_ramp_monotone():
    src = np.array([[[0, 0, 0], [255, 255, 255]]], dtype=np.uint8)
    row = bilinear_resize(PixelImage(src), 4, 1).data[0, :, 0].astype(int)
    assert row[0] == 0 and row[-1] == 255
    assert all(np.diff(row) >= 0)


def test_resize_gradient_against_oracle():
    y, x = np.mgrid[0:64, 0:64]
    src = np.stack([x * 4, y * 4, (x + y) * 2], axis=2).astype(np.uint8)
    got = bilinear_resize(PixelImage(src), 224, 224).data.astype(int)
    want = np.floor(oracles.bilinear(src, 224, 224) + 0.5)
    assert np.abs(got - want).max() <= 1


def test_resize_downscale_against_oracle():
    rng = np.random.default_rng(3)
    src = rng.integers(0, 256, (37, 53, 3), dtype=np.uint8)
    got = bilinear_resize(PixelImage(src), 20, 9).data.astype(int)
    assert np.abs(got - np.floor(oracles.bilinear(src, 20, 9) + 0.5)).max() <= 1


def test_resize_zero_target():
    with pytest.raises(InvalidTarget):
        bilinear_resize(PixelImage.solid(3, 3), 0, 4)


@given(rgb_images)
def test_resize_same_size_identity(arr):
    img = PixelImage(arr)
    assert bilinear_resize(img, img.width, img.height) == img


@given(rgb_images, st.integers(1, 30), st.integers(1, 30))
def test_resize_no_overshoot(arr, tw, th):
    out = bilinear_resize(PixelImage(arr), tw, th).data
    for c in range(3):
        assert arr[..., c].min() <= out[..., c].min()
        assert out[..., c].max() <= arr[..., c].max()


def test_images_are_immutable():
    img = PixelImage.solid(2, 2)
    with pytest.raises(ValueError):
        img.data[0, 0, 0] = 1
    with pytest.raises(ValueError):
        GrayImage(np.zeros((2, 2), np.uint8)).data[0, 0] = 1


def test_png_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    img = PixelImage(rng.integers(0, 256, (6, 9, 3), dtype=np.uint8))
    img.to_png(tmp_path / "a.png")
    assert PixelImage.from_png(tmp_path / "a.png") == img
