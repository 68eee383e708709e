"""Edge-based information detection.

The pipeline turns a screenshot into a binary information matrix::

    grayscale -> CLAHE -> Gaussian smoothing -> Sobel gradients
              -> non-maximum suppression -> hysteresis -> dilation

Every stage replicates edge pixels at the borders and keeps the input
dimensions.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from functools import cached_property
from pathlib import Path

import cv2
import numpy as np

from .errors import BadThresholds, InvalidSigma, TooSmall
from .imaging import GrayImage, PixelImage, _frozen, to_grayscale


_TAN_22_5 = math.tan(math.pi / 8)
_TAN_67_5 = math.tan(3 * math.pi / 8)


@dataclass(frozen=True)
class EdgeConfig:
    clahe_clip_limit: float = 2.0
    clahe_tile: int = 8
    gaussian_sigma: float = 1.4
    hysteresis_low: int = 50
    hysteresis_high: int = 150
    dilation_radius: int = 1
    # Multiplier applied to Sobel magnitudes before rounding and clamping to
    # 8 bits; 0.25 would cancel the Sobel x4 gain.
    magnitude_scale: float = 1.0

    def __post_init__(self):
        if not 0 < self.hysteresis_low < self.hysteresis_high <= 255:
            raise BadThresholds(
                f"need 0 < low < high <= 255, got low={self.hysteresis_low} "
                f"high={self.hysteresis_high}"
            )
        if self.gaussian_sigma <= 0:
            raise InvalidSigma(f"gaussian_sigma must be positive, got {self.gaussian_sigma}")
        if self.dilation_radius < 0:
            raise ValueError("dilation_radius must be >= 0")
        if self.magnitude_scale <= 0:
            raise ValueError("magnitude_scale must be positive")
        if self.clahe_tile < 1 or self.clahe_clip_limit <= 0:
            raise ValueError("clahe_tile must be >= 1 and clahe_clip_limit > 0")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class InfoMatrix:
    """Binary n x m matrix; 1 marks a pixel carrying visual information."""

    bits: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.bits)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError(f"expected a non-empty 2-D matrix, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if arr.dtype != bool and not np.isin(arr, (0, 1)).all():
                raise ValueError("information matrix entries must be 0 or 1")
            arr = arr.astype(np.uint8)
        elif arr.max() > 1:
            raise ValueError("information matrix entries must be 0 or 1")
        object.__setattr__(self, "bits", _frozen(np.ascontiguousarray(arr)))

    @property
    def rows(self) -> int:
        return self.bits.shape[0]

    @property
    def cols(self) -> int:
        return self.bits.shape[1]

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "InfoMatrix":
        return cls(np.zeros((rows, cols), dtype=np.uint8))

    def ones(self) -> int:
        return int(np.count_nonzero(self.bits))

    def density(self) -> float:
        return self.ones() / self.bits.size

    def __eq__(self, other):
        if not isinstance(other, InfoMatrix):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    def to_pbm(self) -> bytes:
        header = f"P4\n{self.cols} {self.rows}\n".encode("ascii")
        return header + np.packbits(self.bits, axis=1).tobytes()

    @classmethod
    def from_pbm(cls, payload: bytes) -> "InfoMatrix":
        tokens = []
        pos = 0
        while len(tokens) < 3:
            while payload[pos:pos + 1].isspace():
                pos += 1
            if payload[pos:pos + 1] == b"#":
                pos = payload.index(b"\n", pos)
                continue
            start = pos
            while not payload[pos:pos + 1].isspace():
                pos += 1
            tokens.append(payload[start:pos])
        if tokens[0] != b"P4":
            raise ValueError("not a binary PBM (P4) payload")
        cols, rows = int(tokens[1]), int(tokens[2])
        row_bytes = (cols + 7) // 8
        raw = np.frombuffer(payload[pos + 1:pos + 1 + rows * row_bytes], dtype=np.uint8)
        if raw.size != rows * row_bytes:
            raise ValueError("truncated PBM payload")
        bits = np.unpackbits(raw.reshape(rows, row_bytes), axis=1)[:, :cols]
        return cls(bits)

    def write_pbm(self, path) -> None:
        Path(path).write_bytes(self.to_pbm())

    def to_rle(self) -> list[list[int]]:
        """Row-major run lengths as ``[zeros, ones]`` pairs, leading zeros first."""
        flat = self.bits.ravel()
        change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
        bounds = np.concatenate(([0], change, [flat.size]))
        runs = np.diff(bounds).tolist()
        if flat[0] == 1:
            runs.insert(0, 0)
        if len(runs) % 2:
            runs.append(0)
        return [runs[i:i + 2] for i in range(0, len(runs), 2)]

    @classmethod
    def from_rle(cls, pairs, rows: int, cols: int) -> "InfoMatrix":
        lengths = np.asarray(pairs, dtype=np.int64).reshape(-1)
        values = np.tile(np.array([0, 1], dtype=np.uint8), lengths.size // 2)
        flat = np.repeat(values, lengths)
        if flat.size != rows * cols:
            raise ValueError(f"RLE covers {flat.size} cells, expected {rows * cols}")
        return cls(flat.reshape(rows, cols))


@dataclass(frozen=True, eq=False)
class GradientField:
    gx: np.ndarray
    gy: np.ndarray

    @cached_property
    def magnitude(self) -> np.ndarray:
        return np.hypot(self.gx, self.gy, dtype=np.float32)

    @cached_property
    def direction(self) -> np.ndarray:
        """Gradient angle in radians, in (-pi, pi]."""
        theta = np.arctan2(self.gy, self.gx)
        # arctan2 yields -pi for (-0.0, negative x); fold onto +pi.
        return np.where(theta <= -np.pi, np.pi, theta)


def equalize_adaptive(img: GrayImage, cfg: EdgeConfig = EdgeConfig()) -> GrayImage:
    """Contrast-limited adaptive histogram equalization (CLAHE).

    Backed by OpenCV: a ``clahe_tile`` x ``clahe_tile`` grid of equal tiles
    (reflect-padded when the size does not divide), histograms clipped at
    ``clip_limit * area / 256`` with the excess spread over all bins, and
    bilinear blending between the four nearest tile mappings. Images smaller
    than the grid in either dimension are equalized as a single tile.
    """
    h, w = img.data.shape
    grid = cfg.clahe_tile if (h >= cfg.clahe_tile and w >= cfg.clahe_tile) else 1
    clahe = cv2.createCLAHE(clipLimit=float(cfg.clahe_clip_limit), tileGridSize=(grid, grid))
    return GrayImage(clahe.apply(np.ascontiguousarray(img.data)))


def gaussian_kernel(sigma: float) -> np.ndarray:
    radius = math.ceil(3 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(x * x) / (2 * sigma * sigma))
    return k / k.sum()


def gaussian_smooth(img: GrayImage, sigma: float) -> GrayImage:
    """Separable Gaussian blur, half-width ``ceil(3 * sigma)``, rounded half up."""
    if not sigma > 0:
        raise InvalidSigma(f"sigma must be positive, got {sigma}")
    k = gaussian_kernel(sigma).astype(np.float32)
    out = cv2.sepFilter2D(img.data, cv2.CV_32F, k, k, borderType=cv2.BORDER_REPLICATE)
    out += np.float32(0.5)
    return GrayImage(out.astype(np.uint8))


def sobel_gradients(img: GrayImage) -> GradientField:
    """3x3 Sobel responses; ``gx`` = right minus left, ``gy`` = below minus above."""
    h, w = img.data.shape
    if h < 3 or w < 3:
        raise TooSmall(f"Sobel needs at least 3x3 pixels, got {w}x{h}")
    src = img.data
    gx = cv2.Sobel(src, cv2.CV_16S, 1, 0, ksize=3, borderType=cv2.BORDER_REPLICATE)
    gy = cv2.Sobel(src, cv2.CV_16S, 0, 1, ksize=3, borderType=cv2.BORDER_REPLICATE)
    return GradientField(gx, gy)


def direction_bins(gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Quantize gradient directions to 0 (0 deg), 1 (45), 2 (90), 3 (135).

    Angles are taken modulo 180 degrees; bin edges sit at 22.5, 67.5, 112.5
    and 157.5 degrees. With y growing downwards, 45 degrees points to the
    lower right.
    """
    gx = np.asarray(gx, dtype=np.float64)
    gy = np.asarray(gy, dtype=np.float64)
    ax, ay = np.abs(gx), np.abs(gy)
    bins = np.where(np.sign(gx) * np.sign(gy) > 0, 1, 3).astype(np.uint8)
    bins[ay < _TAN_22_5 * ax] = 0
    bins[ay > _TAN_67_5 * ax] = 2
    return bins


# (dy, dx) of the forward neighbour for each direction bin.
_NEIGHBOUR = np.array([(0, 1), (1, 1), (1, 0), (-1, 1)], dtype=np.intp)


def non_max_suppress(g: GradientField, gain: float = 1.0, floor: int = 0) -> GrayImage:
    """Thin edges to local maxima across the gradient direction.

    A pixel survives when its magnitude is >= both neighbours along the
    quantized gradient direction (ties survive; neighbours beyond the border
    replicate the edge pixel). Survivors are reported as
    ``min(255, round(magnitude * gain))``. Reported values below ``floor``
    are written as 0, which lets the detector skip pixels that hysteresis
    would discard anyway.
    """
    gx = np.asarray(g.gx)
    gy = np.asarray(g.gy)
    h, w = gx.shape
    if np.issubdtype(gx.dtype, np.integer):
        gxi, gyi = gx.astype(np.int32), gy.astype(np.int32)
        mag2 = gxi * gxi + gyi * gyi
    else:
        mag2 = gx.astype(np.float64) ** 2 + gy.astype(np.float64) ** 2
    if floor > 0:
        # Any pixel that can report >= floor has magnitude >= (floor - 0.5) / gain.
        bound = max(0.0, (floor - 0.5) / gain)
        cand = np.flatnonzero(mag2 >= math.floor(bound * bound) - 1)
    else:
        cand = np.flatnonzero(mag2 > 0)
    out = np.zeros(h * w, dtype=np.uint8)
    if cand.size == 0:
        return GrayImage(out.reshape(h, w))

    flat = mag2.reshape(-1)
    centre = flat[cand]
    ys, xs = np.divmod(cand, w)
    step = _NEIGHBOUR[direction_bins(gx.reshape(-1)[cand], gy.reshape(-1)[cand])]
    fy = np.clip(ys + step[:, 0], 0, h - 1)
    fx = np.clip(xs + step[:, 1], 0, w - 1)
    by = np.clip(ys - step[:, 0], 0, h - 1)
    bx = np.clip(xs - step[:, 1], 0, w - 1)
    keep = (centre >= flat[fy * w + fx]) & (centre >= flat[by * w + bx])
    kept = cand[keep]
    value = np.floor(np.sqrt(centre[keep].astype(np.float64)) * gain + 0.5)
    value = np.minimum(value, 255).astype(np.uint8)
    if floor > 0:
        value[value < floor] = 0
    out[kept] = value
    return GrayImage(out.reshape(h, w))


def hysteresis_threshold(nms: GrayImage, cfg: EdgeConfig = EdgeConfig()) -> InfoMatrix:
    """Strong pixels (>= high) plus weak pixels (>= low) 8-connected to them."""
    low, high = cfg.hysteresis_low, cfg.hysteresis_high
    if not 0 < low < high:
        raise BadThresholds(f"need 0 < low < high, got low={low} high={high}")
    values = nms.data
    out = np.zeros(values.shape, dtype=np.uint8)
    strong = np.flatnonzero(values >= high)
    if strong.size == 0:
        return InfoMatrix(out)
    candidate = (values >= low).view(np.uint8)
    n, labels = cv2.connectedComponents(candidate, connectivity=8, ltype=cv2.CV_32S)
    keep = np.zeros(n, dtype=np.uint8)
    keep[labels.reshape(-1)[strong]] = 1
    keep[0] = 0
    idx = np.flatnonzero(candidate)
    out.reshape(-1)[idx] = keep[labels.reshape(-1)[idx]]
    return InfoMatrix(out)


def dilate(m: InfoMatrix, radius: int) -> InfoMatrix:
    """Set every cell within Chebyshev distance ``radius`` of a 1."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if radius == 0:
        return InfoMatrix(m.bits)
    kernel = np.ones((2 * radius + 1, 2 * radius + 1), dtype=np.uint8)
    out = cv2.dilate(m.bits, kernel, borderType=cv2.BORDER_CONSTANT, borderValue=0)
    return InfoMatrix(out)


def detect_information(img: PixelImage, cfg: EdgeConfig = EdgeConfig()) -> InfoMatrix:
    gray = to_grayscale(img)
    gray = equalize_adaptive(gray, cfg)
    gray = gaussian_smooth(gray, cfg.gaussian_sigma)
    field = sobel_gradients(gray)
    nms = non_max_suppress(field, gain=cfg.magnitude_scale, floor=cfg.hysteresis_low)
    edges = hysteresis_threshold(nms, cfg)
    return dilate(edges, cfg.dilation_radius)
