"""Token and attention-cost accounting, plus an empirical latency probe.

Costs are in normalized units: every big-O constant is 1, so the numbers
compare shapes of growth, not wall-clock time.
"""

from __future__ import annotations

import csv
import io
import json
import statistics
import time
from dataclasses import dataclass, field

import cv2
import numpy as np

from .crop import CropManifest, ISCConfig, isc_pipeline
from .edges import EdgeConfig
from .synth import ScreenSpec, generate_screen

CSV_COLUMNS = ("w", "h", "pixels", "ms_median", "tokens_full", "tokens_isc",
               "t_standard", "t_isc", "ratio")

STANDARD_SIZES = ((854, 480), (1280, 720), (1920, 1080), (2560, 1440))


@dataclass(frozen=True)
class TokenBudgetModel:
    patch_size: int = 14
    target_size: int = 224
    max_subimages: int = 16
    attn_heads: int = 16
    head_dim: int = 64

    def __post_init__(self):
        for name in ("patch_size", "target_size", "max_subimages", "attn_heads", "head_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    @property
    def tokens_per_subimage(self) -> int:
        side = -(-self.target_size // self.patch_size)
        return side * side


def token_count_full(w: int, h: int, model: TokenBudgetModel = TokenBudgetModel()) -> int:
    if w < 1 or h < 1:
        raise ValueError(f"image must be at least 1x1, got {w}x{h}")
    p2 = model.patch_size * model.patch_size
    return -(-(w * h) // p2)


def _n_crops(manifest) -> int:
    if isinstance(manifest, int):
        return manifest
    return len(manifest.sub_images)


def token_count_isc(manifest: CropManifest | int, model: TokenBudgetModel = TokenBudgetModel()) -> int:
    """Tokens for every sub-image in ``manifest`` (or for that many crops)."""
    return _n_crops(manifest) * model.tokens_per_subimage


def modeled_costs(w: int, h: int, manifest: CropManifest | int,
                  model: TokenBudgetModel = TokenBudgetModel()) -> tuple[int, int]:
    """``(T_standard, T_isc)``: full-image attention vs preprocessing plus per-crop attention."""
    hd = model.attn_heads * model.head_dim
    n_full = token_count_full(w, h, model)
    n_sub = model.tokens_per_subimage
    t_standard = n_full * n_full * hd
    t_isc = w * h + _n_crops(manifest) * n_sub * n_sub * hd
    return t_standard, t_isc


@dataclass(frozen=True)
class SizeRecord:
    w: int
    h: int
    ms_median: float
    tokens_full: int
    tokens_isc: int
    t_standard: int
    t_isc: int

    @property
    def pixels(self) -> int:
        return self.w * self.h

    @property
    def ratio(self) -> float:
        return self.t_standard / self.t_isc

    def row(self) -> dict:
        return {"w": self.w, "h": self.h, "pixels": self.pixels, "ms_median": self.ms_median,
                "tokens_full": self.tokens_full, "tokens_isc": self.tokens_isc,
                "t_standard": self.t_standard, "t_isc": self.t_isc, "ratio": self.ratio}


@dataclass
class ScalingReport:
    records: list
    slope_ms_per_mpx: float
    intercept_ms: float
    r_squared: float
    repeats: int
    meta: dict = field(default_factory=dict)

    def to_csv(self, timing: bool = True) -> str:
        buf = io.StringIO()
        cols = [c for c in CSV_COLUMNS if timing or c != "ms_median"]
        writer = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        writer.writeheader()
        for rec in self.records:
            row = rec.row()
            if not timing:
                row.pop("ms_median")
            else:
                row["ms_median"] = f"{row['ms_median']:.3f}"
            row["ratio"] = f"{row['ratio']:.6f}"
            writer.writerow(row)
        return buf.getvalue()

    def summary(self) -> dict:
        return {"sizes": [[r.w, r.h] for r in self.records], "repeats": self.repeats,
                "slope_ms_per_mpx": self.slope_ms_per_mpx,
                "intercept_ms": self.intercept_ms, "r_squared": self.r_squared,
                **self.meta}

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=1, sort_keys=True)


def linear_fit(x, y) -> tuple[float, float, float]:
    """Least-squares ``y = a*x + b``; returns ``(a, b, r_squared)``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    a, b = np.polyfit(x, y, 1)
    resid = y - (a * x + b)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return float(a), float(b), r2


def screen_for_size(w: int, h: int, seed: int = 0, profile: str = "clustered"):
    """Seeded screen whose element count scales with area (24 at 1920x1080)."""
    count = max(4, round(24 * (w * h) / (1920 * 1080)))
    return generate_screen(ScreenSpec(width=w, height=h, seed=seed,
                                      element_count=count, density_profile=profile))


def time_pipeline(img, ecfg=EdgeConfig(), icfg=ISCConfig(), repeats: int = 5):
    """Median wall-clock seconds of ``isc_pipeline`` after one warm-up, single-threaded."""
    prev = cv2.getNumThreads()
    cv2.setNumThreads(1)
    try:
        manifest = isc_pipeline(img, ecfg, icfg)
        samples = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            isc_pipeline(img, ecfg, icfg)
            samples.append(time.perf_counter() - t0)
    finally:
        cv2.setNumThreads(prev)
    return statistics.median(samples), manifest


def scaling_probe(sizes=STANDARD_SIZES, ecfg: EdgeConfig = EdgeConfig(),
                  icfg: ISCConfig = ISCConfig(), model: TokenBudgetModel = TokenBudgetModel(),
                  repeats: int = 3, seed: int = 0) -> ScalingReport:
    sizes = [tuple(s) for s in sizes]
    if len(sizes) < 4:
        raise ValueError("scaling_probe needs at least 4 sizes")
    if repeats < 3:
        raise ValueError("scaling_probe needs repeats >= 3")
    records = []
    for w, h in sizes:
        img, _ = screen_for_size(w, h, seed)
        secs, manifest = time_pipeline(img, ecfg, icfg, repeats)
        t_std, t_isc = modeled_costs(w, h, manifest, model)
        records.append(SizeRecord(w, h, secs * 1000.0, token_count_full(w, h, model),
                                  token_count_isc(manifest, model), t_std, t_isc))
    mpx = [r.pixels / 1e6 for r in records]
    slope, intercept, r2 = linear_fit(mpx, [r.ms_median for r in records])
    return ScalingReport(records, slope, intercept, r2, repeats, {"seed": seed})
