"""Spectral entropy of information matrices.

The matrix is zero-padded to power-of-two sides and transformed with an
iterative radix-2 FFT (rows, then columns). The spectral entropy is the
Shannon entropy, in nats, of the normalized power spectrum taken over every
coefficient of the padded grid.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .edges import InfoMatrix

DEFAULT_H_MIN = 9.0


def next_pow2(n: int) -> int:
    return 1 << max(0, (n - 1).bit_length())


def _bit_reverse(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def fft_axis0(x: np.ndarray) -> np.ndarray:
    """Radix-2 decimation-in-time FFT along axis 0 (length 2**j).

    Butterflies run on whole trailing slices, so a 2-D input transforms all
    of its columns at once with contiguous memory access.
    """
    n = x.shape[0]
    if n < 1 or n & (n - 1):
        raise ValueError(f"FFT length must be a power of two, got {n}")
    tail = x.shape[1:]
    out = np.asarray(x, dtype=np.complex128)[_bit_reverse(n)]
    twiddle_shape = (1, -1) + (1,) * len(tail)
    size = 2
    while size <= n:
        half = size // 2
        blocks = out.reshape((n // size, size) + tail)
        even = blocks[:, :half]
        odd = blocks[:, half:]
        if half == 1:
            t = odd.copy()
        else:
            tw = np.exp(-2j * np.pi * np.arange(half) / size).reshape(twiddle_shape)
            t = odd * tw
        np.subtract(even, t, out=odd)
        even += t
        size *= 2
    return out


def fft_last_axis(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    return np.moveaxis(fft_axis0(np.moveaxis(x, -1, 0)), 0, -1)


@dataclass(frozen=True, eq=False)
class Spectrum:
    coeffs: np.ndarray
    source_dims: tuple

    @property
    def rows(self) -> int:
        return self.coeffs.shape[0]

    @property
    def cols(self) -> int:
        return self.coeffs.shape[1]

    def energy(self) -> np.ndarray:
        return self.coeffs.real ** 2 + self.coeffs.imag ** 2


@dataclass(frozen=True)
class EntropyReport:
    entropy: float
    total_energy: float
    matrix_dims: tuple
    is_hard: bool = False
    degenerate: bool = False

    def to_json(self, image_id) -> str:
        return json.dumps({"image_id": image_id, "entropy": self.entropy,
                           "is_hard": self.is_hard, "dims": list(self.matrix_dims)})


def dft2(m: InfoMatrix) -> Spectrum:
    rows, cols = next_pow2(m.rows), next_pow2(m.cols)
    # Row transforms, computed on the transpose; padding rows are all zero
    # and so are their transforms.
    padded_t = np.zeros((cols, m.rows), dtype=np.float64)
    padded_t[:m.cols] = m.bits.T
    row_t = fft_axis0(padded_t)
    stage = np.zeros((rows, cols), dtype=np.complex128)
    stage[:m.rows] = row_t.T
    coeffs = fft_axis0(stage)
    spec = Spectrum(np.ascontiguousarray(coeffs), (m.rows, m.cols))
    if __debug__:
        # Parseval for a binary matrix: sum |F|^2 = N * (number of ones).
        expected = rows * cols * m.ones()
        got = float(spec.energy().sum())
        assert abs(got - expected) <= 1e-6 * max(1.0, expected), (got, expected)
    return spec


def fftshift(s: Spectrum) -> Spectrum:
    """Swap quadrants so the zero-frequency term sits at (rows/2, cols/2)."""
    shifted = np.roll(s.coeffs, (s.rows // 2, s.cols // 2), axis=(0, 1))
    return Spectrum(shifted, s.source_dims)


def spectral_entropy(s: Spectrum, h_min: float | None = None) -> EntropyReport:
    energy = s.energy().ravel()
    total = float(energy.sum())
    if total == 0.0:
        return EntropyReport(0.0, 0.0, tuple(s.source_dims), False, True)
    p = energy[energy > 0] / total
    h = float(-(p * np.log(p)).sum())
    h = max(h, 0.0)
    hard = h_min is not None and h > h_min
    return EntropyReport(h, total, tuple(s.source_dims), hard, False)


def entropy_report(m: InfoMatrix, h_min: float | None = None) -> EntropyReport:
    return spectral_entropy(dft2(m), h_min)


def max_entropy(s: Spectrum) -> float:
    return math.log(s.rows * s.cols)


def select_visual_hard_cases(reports, h_min: float) -> list:
    """Ids whose entropy exceeds ``h_min``, highest entropy first."""
    if h_min < 0:
        raise ValueError("h_min must be >= 0")
    hard = [(image_id, r) for image_id, r in reports if not r.degenerate and r.entropy > h_min]
    hard.sort(key=lambda item: -item[1].entropy)
    return [image_id for image_id, _ in hard]
