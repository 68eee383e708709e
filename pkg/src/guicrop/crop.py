"""Information-sensitive cropping: adaptive region extraction and resizing.

Square windows sweep the information matrix at geometrically growing
scales. A window whose density reaches the scale's threshold becomes a
region and its cells are zeroed in a private working copy, so each 1-cell
counts towards at most one region. Regions are then cropped from the
screenshot and resized to a common ``target_size`` square.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import cv2
import numpy as np

from .edges import EdgeConfig, InfoMatrix, detect_information
from .errors import OutOfBounds
from .imaging import PixelImage, Rect, crop_rect, resize_array


@dataclass(frozen=True)
class ISCConfig:
    k_min: int = 64
    rho_min: float = 0.10
    alpha: float = 1.5
    n_max: int = 16
    target_size: int = 224
    rho_floor: float = 0.005
    include_context_thumbnail: bool = False

    def __post_init__(self):
        if self.k_min < 8:
            raise ValueError(f"k_min must be >= 8, got {self.k_min}")
        if not 0 < self.rho_min <= 1:
            raise ValueError(f"rho_min must lie in (0, 1], got {self.rho_min}")
        if not self.alpha > 1:
            raise ValueError(f"alpha must exceed 1, got {self.alpha}")
        if self.n_max < 1:
            raise ValueError(f"n_max must be >= 1, got {self.n_max}")
        if self.target_size < 32:
            raise ValueError(f"target_size must be >= 32, got {self.target_size}")
        if self.rho_floor < 0:
            raise ValueError("rho_floor must be nonnegative")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Region:
    x: int
    y: int
    k: int
    id: int
    density: float

    def rect(self) -> Rect:
        return Rect(self.x, self.y, self.k, self.k)

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "k": self.k, "id": self.id, "density": self.density}


@dataclass
class CropManifest:
    source: dict
    regions: list
    sub_images: list
    residual_coverage: float
    config: ISCConfig
    info: InfoMatrix | None = None
    edge_config: EdgeConfig | None = None
    sub_image_names: list = field(default_factory=list)

    def to_dict(self) -> dict:
        config = self.config.to_dict()
        if self.edge_config is not None:
            config["edge"] = self.edge_config.to_dict()
        out = {
            "source": dict(self.source),
            "config": config,
            "regions": [r.to_dict() for r in self.regions],
            "residual_coverage": self.residual_coverage,
        }
        if self.sub_image_names:
            out["sub_images"] = list(self.sub_image_names)
        out["info_matrix_rle"] = self.info.to_rle() if self.info is not None else []
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    def write(self, out_dir, stem: str | None = None, images: bool = True) -> Path:
        """Write ``{stem}.json`` and, unless ``images`` is false, one PNG per crop."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        stem = stem or Path(self.source.get("path") or "screen").stem
        self.sub_image_names = [f"{stem}_r{r.id}.png" for r in self.regions]
        if images:
            for name, sub in zip(self.sub_image_names, self.sub_images):
                sub.to_png(out_dir / name)
        path = out_dir / f"{stem}.json"
        path.write_text(self.to_json() + "\n")
        return path


def window_density(m: InfoMatrix, x: int, y: int, k: int) -> float:
    if k < 1 or x < 0 or y < 0 or x + k > m.cols or y + k > m.rows:
        raise OutOfBounds(f"window ({x}, {y}, {k}) outside {m.cols}x{m.rows} matrix")
    return int(m.bits[y:y + k, x:x + k].sum()) / (k * k)


def scale_threshold(cfg: ISCConfig, k: int) -> float:
    return max(cfg.rho_min / (k / cfg.k_min) ** 2, cfg.rho_floor)


def scale_schedule(cfg: ISCConfig, rows: int, cols: int) -> list[int]:
    """Window sizes visited when the region budget is never exhausted."""
    ks = []
    k = cfg.k_min
    while k <= max(rows, cols):
        ks.append(k)
        k = math.ceil(cfg.alpha * k)
    return ks


def _integral(bits: np.ndarray) -> np.ndarray:
    """Summed-area table with a zero first row and column."""
    return cv2.integral(bits, sdepth=cv2.CV_32S)


def adaptive_extract(m: InfoMatrix, cfg: ISCConfig = ISCConfig()) -> list[Region]:
    """Multi-scale sliding-window region extraction.

    Window sums come from an integral image of the untouched matrix; a
    window overlapping an already-zeroed region is recounted on the working
    copy, so every density equals the plain cell count divided by ``k**2``.
    Scanning is row-major with step ``max(k // 4, 32)`` and stops as soon as
    ``n_max`` regions exist. The result is sorted by density (descending),
    ties by extraction id.
    """
    rows, cols = m.rows, m.cols
    work = m.bits.copy()
    ii = _integral(m.bits)
    taken: list[Region] = []

    for k in scale_schedule(cfg, rows, cols):
        if len(taken) >= cfg.n_max:
            break
        if k > rows or k > cols:
            continue
        step = max(k // 4, 32)
        rho = scale_threshold(cfg, k)
        area = k * k
        xs = np.arange(0, cols - k + 1, step)
        ys = np.arange(0, rows - k + 1, step)
        sums = (ii[np.ix_(ys + k, xs + k)] - ii[np.ix_(ys, xs + k)]
                - ii[np.ix_(ys + k, xs)] + ii[np.ix_(ys, xs)])
        # Zeroing only lowers sums, so the untouched sums bound every window.
        for iy, ix in np.argwhere(sums / area >= rho):
            x, y = int(xs[ix]), int(ys[iy])
            count = int(sums[iy, ix])
            if any(x < r.x + r.k and r.x < x + k and y < r.y + r.k and r.y < y + k
                   for r in taken):
                count = int(work[y:y + k, x:x + k].sum())
            density = count / area
            if density < rho:
                continue
            taken.append(Region(x, y, k, len(taken) + 1, density))
            work[y:y + k, x:x + k] = 0
            if len(taken) >= cfg.n_max:
                break

    return sorted(taken, key=lambda r: (-r.density, r.id))


def coverage(m: InfoMatrix, regions) -> float:
    """Fraction of the matrix's 1-cells lying inside the union of ``regions``."""
    total = m.ones()
    if total == 0 or not regions:
        return 0.0
    mask = np.zeros(m.bits.shape, dtype=bool)
    for r in regions:
        mask[r.y:r.y + r.k, r.x:r.x + r.k] = True
    return int(np.count_nonzero(m.bits[mask])) / total


def finalize_crops(img: PixelImage, regions, cfg: ISCConfig = ISCConfig(),
                   info: InfoMatrix | None = None, source_path=None) -> CropManifest:
    """Crop every region from ``img`` and resize it to ``target_size`` squared.

    ``residual_coverage`` is measured against ``info`` (0 when absent or when
    there are no regions). With ``include_context_thumbnail`` a whole-image
    thumbnail is appended as id 0 with ``k = 0``; it is outside the ``n_max``
    budget and does not count towards coverage.
    """
    s = cfg.target_size
    subs = []
    for r in regions:
        if r.x + r.k > img.width or r.y + r.k > img.height:
            raise OutOfBounds(f"region {r} outside {img.width}x{img.height} image")
        subs.append(PixelImage(resize_array(crop_rect(img, r.rect()).data, s, s)))
    out_regions = list(regions)
    cov = coverage(info, out_regions) if info is not None else 0.0
    if cfg.include_context_thumbnail:
        global_density = info.density() if info is not None else 0.0
        out_regions.append(Region(0, 0, 0, 0, global_density))
        subs.append(PixelImage(resize_array(img.data, s, s)))
    source = {"path": str(source_path) if source_path is not None else None,
              "width": img.width, "height": img.height}
    return CropManifest(source, out_regions, subs, cov, cfg, info)


def isc_pipeline(img: PixelImage, ecfg: EdgeConfig = EdgeConfig(),
                 icfg: ISCConfig = ISCConfig(), source_path=None) -> CropManifest:
    info = detect_information(img, ecfg)
    regions = adaptive_extract(info, icfg)
    manifest = finalize_crops(img, regions, icfg, info, source_path)
    manifest.edge_config = ecfg
    return manifest
