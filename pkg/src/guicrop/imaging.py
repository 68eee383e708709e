"""Raster images, grayscale conversion, cropping and bilinear resizing.

Images are thin immutable wrappers over ``numpy`` arrays: ``PixelImage``
holds an ``(H, W, 3)`` uint8 RGB buffer and ``GrayImage`` an ``(H, W)``
uint8 luminance buffer.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np
from PIL import Image

from .errors import InvalidTarget, OutOfBounds

# Rec.601 luma weights in thousandths (they sum to 1000) plus a rounding
# offset. Every partial sum is an integer or half-integer below 2**24, so
# float32 accumulation is exact.
_LUMA = np.array([[299, 587, 114, 500.5]], dtype=np.float32)


def _frozen(arr: np.ndarray) -> np.ndarray:
    if arr.flags.writeable:
        arr = arr.copy()
        arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class PixelImage:
    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"expected (H, W, 3) RGB data, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        if arr.dtype != np.uint8:
            if arr.min() < 0 or arr.max() > 255:
                raise ValueError("pixel values must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        object.__setattr__(self, "data", _frozen(np.ascontiguousarray(arr)))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @classmethod
    def solid(cls, width: int, height: int, rgb=(255, 255, 255)) -> "PixelImage":
        data = np.empty((height, width, 3), dtype=np.uint8)
        data[...] = np.asarray(rgb, dtype=np.uint8)
        return cls(data)

    @classmethod
    def from_png(cls, path) -> "PixelImage":
        with Image.open(path) as im:
            return cls(np.asarray(im.convert("RGB")))

    def to_png(self, path) -> None:
        Image.fromarray(self.data, mode="RGB").save(Path(path), format="PNG")

    def __eq__(self, other):
        if not isinstance(other, PixelImage):
            return NotImplemented
        return np.array_equal(self.data, other.data)


@dataclass(frozen=True, eq=False)
class GrayImage:
    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"expected non-empty (H, W) data, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if arr.min() < 0 or arr.max() > 255:
                raise ValueError("luminance values must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        object.__setattr__(self, "data", _frozen(np.ascontiguousarray(arr)))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return np.array_equal(self.data, other.data)


@dataclass(frozen=True)
class Rect:
    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise ValueError(f"rect must be at least 1x1, got {self.w}x{self.h}")
        if self.x < 0 or self.y < 0:
            raise ValueError(f"rect origin must be nonnegative, got ({self.x}, {self.y})")

    def offset(self, inner: "Rect") -> "Rect":
        """Express ``inner`` (relative to this rect) in this rect's parent frame."""
        return Rect(self.x + inner.x, self.y + inner.y, inner.w, inner.h)


def to_grayscale(img: PixelImage) -> GrayImage:
    # floor((299 R + 587 G + 114 B + 500) / 1000), i.e. luma rounded half up.
    # The extra 0.5 in the offset keeps exact multiples of 1000 clear of
    # float32 rounding in the final scaling; truncation then floors.
    acc = cv2.transform(img.data.astype(np.float32), _LUMA)
    acc *= np.float32(0.001)
    return GrayImage(acc.astype(np.uint8))


def crop_rect(img: PixelImage, r: Rect) -> PixelImage:
    if r.x + r.w > img.width or r.y + r.h > img.height:
        raise OutOfBounds(
            f"rect {r} exceeds image extent {img.width}x{img.height}"
        )
    return PixelImage(img.data[r.y:r.y + r.h, r.x:r.x + r.w])


def _axis_weights(n_src: int, n_dst: int) -> np.ndarray:
    """(n_dst, n_src) interpolation matrix with pixel-center alignment."""
    scale = n_src / n_dst
    pos = (np.arange(n_dst, dtype=np.float64) + 0.5) * scale - 0.5
    pos = np.clip(pos, 0.0, n_src - 1)
    lo = np.floor(pos).astype(np.intp)
    hi = np.minimum(lo + 1, n_src - 1)
    frac = pos - lo
    mat = np.zeros((n_dst, n_src))
    rows = np.arange(n_dst)
    np.add.at(mat, (rows, lo), 1.0 - frac)
    np.add.at(mat, (rows, hi), frac)
    return mat


def resize_array(arr: np.ndarray, target_w: int, target_h: int) -> np.ndarray:
    """Bilinear resize of a 2-D or 3-D uint8 array, rounding half up."""
    if target_w < 1 or target_h < 1:
        raise InvalidTarget(f"target size must be positive, got {target_w}x{target_h}")
    h, w = arr.shape[:2]
    if (w, h) == (target_w, target_h):
        return arr.copy()
    wy = _axis_weights(h, target_h)
    wx = _axis_weights(w, target_w)
    src = arr.astype(np.float64)
    if arr.ndim == 2:
        out = wy @ src @ wx.T
    else:
        out = np.tensordot(wy, src, axes=(1, 0))          # (th, W, C)
        out = np.tensordot(out, wx, axes=(1, 1))          # (th, C, tw)
        out = out.transpose(0, 2, 1)
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def bilinear_resize(img: PixelImage, target_w: int, target_h: int) -> PixelImage:
    return PixelImage(resize_array(img.data, target_w, target_h))
