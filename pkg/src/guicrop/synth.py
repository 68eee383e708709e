"""Deterministic synthetic GUI screens with exact ground truth.

Screens are drawn straight into numpy buffers: bordered rectangles, hatch
strokes standing in for text, and small icon glyphs. No font stack is
involved, so a ``ScreenSpec`` fixes every output byte on every platform.
The module also provides oracle agents that answer referring and grounding
queries from the ground truth.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .edges import InfoMatrix
from .errors import PlacementFailure, UnknownDescription
from .imaging import PixelImage
from .srdl import BBox, ElementDescription, iou

PROFILES = ("sparse", "clustered", "dense")
KINDS = ("button", "input", "icon", "text", "menu")

DEFAULT_PALETTE = {
    "background": (246, 246, 248),
    "border": (64, 64, 72),
    "ink": (32, 32, 40),
    "widgets": [(66, 133, 244), (52, 168, 83), (251, 188, 5), (234, 67, 53),
                (171, 71, 188), (0, 172, 193), (255, 255, 255), (224, 224, 228)],
}

_NOUNS = {"button": "button", "input": "input field", "icon": "icon",
          "text": "text label", "menu": "menu"}
_LABELS = ["save", "open", "search", "settings", "profile", "share", "delete",
           "print", "help", "home", "export", "filter", "upload", "refresh",
           "download", "account", "cart", "inbox", "calendar", "music", "camera",
           "bookmark", "history", "login", "logout", "next", "previous", "close",
           "edit", "copy", "paste", "undo", "redo", "zoom", "notify", "chat",
           "send", "attach", "lock", "menu", "sort", "view", "layout", "theme",
           "language", "wifi", "battery", "volume", "power", "play", "pause"]
_COLOR_WORDS = ["blue", "green", "yellow", "red", "purple", "teal", "white", "gray"]

# (min_w, max_w, min_h, max_h) per kind
_SIZES = {"button": (64, 160, 26, 40), "input": (140, 300, 26, 36),
          "icon": (18, 32, 18, 32), "text": (60, 220, 14, 20),
          "menu": (110, 180, 90, 170)}

_STOPWORDS = {"the", "a", "an", "of", "on", "in", "to", "at", "for", "with",
              "this", "that", "please", "screen"}


def tokens(text: str) -> set[str]:
    return {t for t in re.findall(r"[a-z0-9]+", text.lower()) if t not in _STOPWORDS}


@dataclass(frozen=True)
class ScreenSpec:
    width: int = 1920
    height: int = 1080
    seed: int = 0
    element_count: int = 24
    density_profile: str = "clustered"
    palette: dict = field(default_factory=lambda: DEFAULT_PALETTE, compare=False)
    n_clusters: int = 5
    kinds: tuple | None = None

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("screen must be at least 1x1")
        if self.element_count < 0:
            raise ValueError("element_count must be >= 0")
        if self.density_profile not in PROFILES:
            raise ValueError(f"density_profile must be one of {PROFILES}")
        if self.n_clusters < 1:
            raise ValueError("n_clusters must be >= 1")
        if self.kinds is not None:
            if not self.kinds or any(k not in KINDS for k in self.kinds):
                raise ValueError(f"kinds must be a non-empty subset of {KINDS}")
            object.__setattr__(self, "kinds", tuple(self.kinds))


@dataclass(frozen=True)
class Element:
    id: int
    bbox: BBox
    kind: str
    description: str


@dataclass(frozen=True, eq=False)
class GroundTruth:
    elements: tuple
    info_mask: InfoMatrix

    def by_description(self, text: str) -> Element | None:
        for e in self.elements:
            if e.description == text:
                return e
        return None

    def to_dict(self) -> dict:
        return {
            "width": self.info_mask.cols,
            "height": self.info_mask.rows,
            "elements": [{"id": e.id, "bbox": list(e.bbox.as_tuple()), "kind": e.kind,
                          "description": e.description} for e in self.elements],
        }

    @classmethod
    def from_dict(cls, d: dict, info_mask: InfoMatrix | None = None) -> "GroundTruth":
        elements = tuple(Element(e["id"], BBox(*e["bbox"]), e["kind"], e["description"])
                         for e in d["elements"])
        mask = info_mask if info_mask is not None else InfoMatrix.zeros(d["height"], d["width"])
        return cls(elements, mask)


class _Canvas:
    def __init__(self, width, height, background):
        self.rgb = np.empty((height, width, 3), dtype=np.uint8)
        self.rgb[...] = background
        self.mask = np.zeros((height, width), dtype=np.uint8)

    def fill(self, x, y, w, h, color):
        self.rgb[y:y + h, x:x + w] = color

    def stroke(self, x, y, w, h, color):
        if w <= 0 or h <= 0:
            return
        self.rgb[y:y + h, x:x + w] = color
        self.mask[y:y + h, x:x + w] = 1

    def border(self, x, y, w, h, t, color):
        self.stroke(x, y, w, t, color)
        self.stroke(x, y + h - t, w, t, color)
        self.stroke(x, y, t, h, color)
        self.stroke(x + w - t, y, t, h, color)


def _text_line(canvas, rng, x, y, w, color, glyph_h=7):
    """Hatch a line of pseudo-text: words made of 1-px vertical stems."""
    cx = x
    end = x + w
    while cx < end - 4:
        word = int(rng.integers(3, 8))
        for _ in range(word):
            if cx >= end:
                break
            stem = glyph_h if rng.random() < 0.7 else glyph_h - 2
            canvas.stroke(cx, y + glyph_h - stem, 1, stem, color)
            cx += 3
        cx += 5


def _draw(canvas, rng, kind, x, y, w, h, palette, heavy):
    ink = palette["ink"]
    widget = palette["widgets"][int(rng.integers(len(palette["widgets"])))]
    t = 1 if rng.random() < 0.5 else 2
    if kind in ("button", "menu", "icon"):
        canvas.fill(x, y, w, h, widget)
    elif kind == "input":
        canvas.fill(x, y, w, h, (255, 255, 255))
    canvas.border(x, y, w, h, t, palette["border"])
    pad = t + 4
    inner_w = w - 2 * pad
    if kind == "icon":
        # Plus-shaped glyph.
        mid_x, mid_y = x + w // 2, y + h // 2
        arm = max(2, min(w, h) // 2 - pad)
        canvas.stroke(mid_x - arm, mid_y - 1, 2 * arm, 2, ink)
        canvas.stroke(mid_x - 1, mid_y - arm, 2, 2 * arm, ink)
        return
    if inner_w < 6:
        return
    if kind == "menu":
        rows = range(y + pad, y + h - pad - 7, 14 if heavy else 20)
        for ry in rows:
            _text_line(canvas, rng, x + pad, ry, int(inner_w * rng.uniform(0.5, 1.0)), ink)
        return
    glyph_top = y + (h - 7) // 2
    frac = rng.uniform(0.7, 1.0) if heavy else rng.uniform(0.3, 0.7)
    _text_line(canvas, rng, x + pad, glyph_top, max(6, int(inner_w * frac)), ink)


def _describe(rng, kind, used):
    for _ in range(200):
        label = _LABELS[int(rng.integers(len(_LABELS)))]
        text = f"{label} {_NOUNS[kind]}"
        if rng.random() < 0.5:
            text = f"{_COLOR_WORDS[int(rng.integers(len(_COLOR_WORDS)))]} {text}"
        if text not in used:
            return text
    n = 2
    while f"{text} {n}" in used:
        n += 1
    return f"{text} {n}"


def _kind_for(rng, profile, kinds=None):
    if kinds is not None:
        return kinds[int(rng.integers(len(kinds)))]
    weights = {"sparse": [0.3, 0.2, 0.25, 0.2, 0.05],
               "clustered": [0.3, 0.15, 0.35, 0.15, 0.05],
               "dense": [0.3, 0.15, 0.25, 0.2, 0.1]}[profile]
    return KINDS[int(rng.choice(len(KINDS), p=weights))]


def _place(spec, rng, w, h, boxes, margin, retries=2000):
    for _ in range(retries):
        x = int(rng.integers(0, max(1, spec.width - w + 1)))
        y = int(rng.integers(0, max(1, spec.height - h + 1)))
        if x + w > spec.width or y + h > spec.height:
            continue
        if all(x + w + margin <= bx or bx2 + margin <= x or y + h + margin <= by or by2 + margin <= y
               for bx, by, bx2, by2 in boxes):
            return x, y
    return None


def _size_for(rng, kind, spec):
    min_w, max_w, min_h, max_h = _SIZES[kind]
    w = int(rng.integers(min_w, max_w + 1))
    h = w if kind == "icon" else int(rng.integers(min_h, max_h + 1))
    return min(w, spec.width), min(h, spec.height)


def _flow(sizes, per_row, gap):
    """Offsets of a left-to-right, top-to-bottom block layout and its extent."""
    offsets, x, y, row_h, width = [], 0, 0, 0, 0
    for n, (w, h) in enumerate(sizes):
        if n and n % per_row == 0:
            x, y, row_h = 0, y + row_h + gap, 0
        offsets.append((x, y))
        width = max(width, x + w)
        x += w + gap
        row_h = max(row_h, h)
    return offsets, width, y + row_h


def _layout_clusters(spec, rng, items):
    """Compact widget groups, one per cluster, placed without overlap."""
    groups = [list(range(c, len(items), spec.n_clusters)) for c in range(spec.n_clusters)]
    blocks, pos = [], [None] * len(items)
    for members in groups:
        if not members:
            continue
        sizes = [items[i][1] for i in members]
        offsets, bw, bh = _flow(sizes, 2, 6)
        at = _place(spec, rng, bw, bh, blocks, 40)
        if at is None:
            return None
        blocks.append((at[0], at[1], at[0] + bw, at[1] + bh))
        for i, (ox, oy) in zip(members, offsets):
            pos[i] = (at[0] + ox, at[1] + oy)
    return pos


def _layout_rows(spec, items):
    """Toolbar rows, left to right, wrapping downwards."""
    pos, row_x, row_y, row_h = [], 8, 8, 0
    for _, (w, h) in items:
        if row_x + w > spec.width - 8:
            row_x, row_y, row_h = 8, row_y + row_h + 12, 0
        if row_y + h > spec.height - 8:
            return None
        pos.append((row_x, row_y))
        row_x += w + 10
        row_h = max(row_h, h)
    return pos


def generate_screen(spec: ScreenSpec):
    """Render ``spec`` and return ``(PixelImage, GroundTruth)``.

    ``sparse`` scatters elements over the whole screen, ``clustered`` packs
    them into ``n_clusters`` compact groups (element ``i`` joins group
    ``i % n_clusters``), and ``dense`` fills toolbar rows with heavier text
    hatching. The ground-truth mask marks exactly the stroke pixels
    (borders, hatches, glyphs).
    """
    palette = spec.palette
    rng = np.random.default_rng(spec.seed)
    canvas = _Canvas(spec.width, spec.height, palette["background"])
    heavy = spec.density_profile == "dense"

    items = []
    for _ in range(spec.element_count):
        kind = _kind_for(rng, spec.density_profile, spec.kinds)
        items.append((kind, _size_for(rng, kind, spec)))

    if spec.density_profile == "clustered":
        pos = _layout_clusters(spec, rng, items)
    elif heavy:
        pos = _layout_rows(spec, items)
    else:
        pos, boxes = [], []
        for _, (w, h) in items:
            at = _place(spec, rng, w, h, boxes, 12)
            if at is None:
                pos = None
                break
            pos.append(at)
            boxes.append((at[0], at[1], at[0] + w, at[1] + h))
    if pos is None:
        raise PlacementFailure(
            f"could not place {spec.element_count} {spec.density_profile} elements "
            f"on a {spec.width}x{spec.height} screen"
        )

    elements, used = [], set()
    for i, ((kind, (w, h)), (x, y)) in enumerate(zip(items, pos)):
        _draw(canvas, rng, kind, x, y, w, h, palette, heavy)
        text = _describe(rng, kind, used)
        used.add(text)
        elements.append(Element(i + 1, BBox(x, y, x + w, y + h), kind, text))

    image = PixelImage(canvas.rgb)
    return image, GroundTruth(tuple(elements), InfoMatrix(canvas.mask))


def write_screen(spec: ScreenSpec, out_dir, stem: str = "screen"):
    """Write ``{stem}.png``, ``{stem}.json`` (ground truth) and ``{stem}.pbm``."""
    image, gt = generate_screen(spec)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    image.to_png(out_dir / f"{stem}.png")
    doc = gt.to_dict()
    doc["spec"] = {"width": spec.width, "height": spec.height, "seed": spec.seed,
                   "element_count": spec.element_count,
                   "density_profile": spec.density_profile, "n_clusters": spec.n_clusters,
                   "kinds": list(spec.kinds) if spec.kinds else None}
    (out_dir / f"{stem}.json").write_text(json.dumps(doc, indent=1) + "\n")
    gt.info_mask.write_pbm(out_dir / f"{stem}.pbm")
    return image, gt


# ---------------------------------------------------------------- agents


class OracleAgent:
    """Answers grounding and referring queries from ground truth.

    ``truth`` is either one ``GroundTruth`` (used for every image) or a
    mapping from image handle to ``GroundTruth``; handles are matched
    verbatim and then by file stem.
    """

    concurrent_safe = True

    def __init__(self, truth):
        self._truth = truth
        self.calls = {"enumerate": 0, "ground": 0, "refer": 0}

    def _gt(self, image) -> GroundTruth:
        if isinstance(self._truth, GroundTruth):
            return self._truth
        key = str(image)
        if key in self._truth:
            return self._truth[key]
        stem = Path(key).stem
        if stem in self._truth:
            return self._truth[stem]
        raise UnknownDescription(f"no ground truth for image {image!r}")

    def enumerate(self, image) -> list[ElementDescription]:
        self.calls["enumerate"] += 1
        return [ElementDescription(e.description, "basic", "enumeration")
                for e in self._gt(image).elements]

    def _resolve(self, gt: GroundTruth, text: str) -> Element:
        exact = gt.by_description(text)
        if exact is not None:
            return exact
        query = tokens(text)
        best, best_key = None, (0, 0.0)
        for e in gt.elements:
            cand = tokens(e.description)
            overlap = len(query & cand)
            key = (overlap, overlap / len(query | cand) if overlap else 0.0)
            if key > best_key:
                best, best_key = e, key
        if best is None:
            raise UnknownDescription(f"no element matches {text!r}")
        return best

    def _box(self, e: Element, gt: GroundTruth) -> BBox:
        return e.bbox

    def ground(self, image, description) -> BBox:
        self.calls["ground"] += 1
        gt = self._gt(image)
        text = description.text if isinstance(description, ElementDescription) else description
        return self._box(self._resolve(gt, text), gt)

    def refer(self, image, bbox: BBox) -> ElementDescription:
        self.calls["refer"] += 1
        gt = self._gt(image)
        if not gt.elements:
            raise UnknownDescription("screen has no elements")
        cx, cy = bbox.center()

        def score(e):
            ex, ey = e.bbox.center()
            return (-iou(e.bbox, bbox), (ex - cx) ** 2 + (ey - cy) ** 2, e.id)

        best = min(gt.elements, key=score)
        return ElementDescription(best.description, "referred", "referring")


def perfect_agent(gt) -> OracleAgent:
    return OracleAgent(gt)


class NoisyAgent(OracleAgent):
    """Grounds with every box edge perturbed by seeded uniform noise."""

    def __init__(self, truth, jitter_px: float, seed: int = 0):
        if jitter_px < 0:
            raise ValueError("jitter_px must be >= 0")
        super().__init__(truth)
        self.jitter_px = jitter_px
        self._rng = np.random.default_rng(seed)

    def _box(self, e, gt):
        if self.jitter_px == 0:
            return e.bbox
        d = self._rng.uniform(-self.jitter_px, self.jitter_px, size=4)
        b = e.bbox
        x1 = max(0.0, b.x1 + d[0])
        y1 = max(0.0, b.y1 + d[1])
        x2 = min(float(gt.info_mask.cols), b.x2 + d[2])
        y2 = min(float(gt.info_mask.rows), b.y2 + d[3])
        # Jitter larger than the element can flip an edge pair; keep 1 px.
        if x2 - x1 < 1:
            x1 = min(x1, float(gt.info_mask.cols) - 1)
            x2 = x1 + 1
        if y2 - y1 < 1:
            y1 = min(y1, float(gt.info_mask.rows) - 1)
            y2 = y1 + 1
        return BBox(x1, y1, x2, y2)


class DriftingAgent(OracleAgent):
    """Translates each grounded box by an offset that grows on every call.

    Single-caller by contract: the cumulative offset is shared state.
    """

    concurrent_safe = False

    def __init__(self, truth, drift_px_per_call: float):
        if drift_px_per_call < 0:
            raise ValueError("drift must be >= 0")
        super().__init__(truth)
        self.drift = drift_px_per_call
        self.offset = 0.0

    def _box(self, e, gt):
        self.offset += self.drift
        if self.offset == 0:
            return e.bbox
        b = e.bbox
        return BBox(b.x1 + self.offset, b.y1, b.x2 + self.offset, b.y2)


def noisy_agent(gt, jitter_px: float, seed: int = 0) -> NoisyAgent:
    return NoisyAgent(gt, jitter_px, seed)


def drifting_agent(gt, drift_px_per_call: float) -> DriftingAgent:
    return DriftingAgent(gt, drift_px_per_call)
