"""Self-refining dual learning: referring/grounding loop and hard-case mining.

An agent exposes three calls:

* ``enumerate(image)`` -> basic ``ElementDescription`` list
* ``ground(image, description)`` -> ``BBox``
* ``refer(image, bbox)`` -> ``ElementDescription``

``dual_loop`` alternates grounding and referring until two successive
grounded boxes agree (IoU above ``tau``) and keeps the converged
(description, box) pairs as self-annotations. ``run_srdl`` adds visual hard
cases (high spectral entropy screens) and functional hard cases (augmented
variants of descriptions the agent failed on before).
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Protocol

from .errors import AgentFailure, AugmenterFailure, DegenerateBox, ProtocolError

log = logging.getLogger(__name__)

SOURCES = ("baseline", "visual", "functional")


@dataclass(frozen=True)
class BBox:
    """Half-open box ``[x1, x2) x [y1, y2)`` in pixel coordinates."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise DegenerateBox(f"box {self.as_tuple()} has nonpositive area")

    def as_tuple(self) -> tuple:
        return (self.x1, self.y1, self.x2, self.y2)

    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    def center(self) -> tuple:
        return ((self.x1 + self.x2) / 2, (self.y1 + self.y2) / 2)


def iou(a, b) -> float:
    ax1, ay1, ax2, ay2 = a.as_tuple() if isinstance(a, BBox) else a
    bx1, by1, bx2, by2 = b.as_tuple() if isinstance(b, BBox) else b
    area_a = (ax2 - ax1) * (ay2 - ay1)
    area_b = (bx2 - bx1) * (by2 - by1)
    if ax2 <= ax1 or ay2 <= ay1 or bx2 <= bx1 or by2 <= by1:
        raise DegenerateBox("IoU needs boxes with positive area")
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (area_a + area_b - inter)


@dataclass(frozen=True)
class ElementDescription:
    text: str
    kind: str = "basic"
    origin: str = "enumeration"
    seed: str | None = None
    image_id: str | None = None

    def __post_init__(self):
        if not self.text or not self.text.strip():
            raise ValueError("description text must be nonempty")
        if self.kind not in ("basic", "referred", "augmented"):
            raise ValueError(f"unknown description kind {self.kind!r}")


class Agent(Protocol):
    def enumerate(self, image) -> list[ElementDescription]: ...

    def ground(self, image, description) -> BBox: ...

    def refer(self, image, bbox: BBox) -> ElementDescription: ...


@dataclass(frozen=True)
class DualLoopConfig:
    tau: float = 0.7
    max_iters: int = 5

    def __post_init__(self):
        if not 0 < self.tau <= 1:
            raise ValueError(f"tau must lie in (0, 1], got {self.tau}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")


@dataclass(frozen=True)
class Sample:
    description: ElementDescription
    bbox: BBox
    image_id: str | None
    iterations_used: int
    final_iou: float
    source: str = "baseline"

    def to_dict(self) -> dict:
        return {"image": self.image_id, "description": self.description.text,
                "bbox": list(self.bbox.as_tuple()), "iters": self.iterations_used,
                "iou": self.final_iou, "source": self.source}


@dataclass(frozen=True)
class Rejection:
    description: ElementDescription
    reason: str
    image_id: str | None = None
    source: str = "baseline"


@dataclass
class SelfAnnotationSet:
    samples: list = field(default_factory=list)
    rejected: list = field(default_factory=list)

    def extend(self, other: "SelfAnnotationSet") -> None:
        self.samples.extend(other.samples)
        self.rejected.extend(other.rejected)

    def counts(self) -> dict:
        c = Counter(s.source for s in self.samples)
        return {src: c.get(src, 0) for src in SOURCES}

    def to_jsonl(self) -> str:
        return "".join(json.dumps(s.to_dict()) + "\n" for s in self.samples)


@dataclass(frozen=True)
class HistoryRecord:
    image_id: str
    description: str
    predicted: BBox | None
    truth: BBox | None
    iou: float
    success: bool

    def __post_init__(self):
        if not 0.0 <= self.iou <= 1.0:
            raise ValueError(f"iou must lie in [0, 1], got {self.iou}")


@dataclass
class PerformanceHistory:
    records: list = field(default_factory=list)

    def add(self, image_id, description, predicted, truth, iou_value, success) -> None:
        self.records.append(HistoryRecord(image_id, description, predicted, truth,
                                          iou_value, success))

    def failures(self, iou_floor: float = 0.3) -> list[HistoryRecord]:
        return [r for r in self.records if not r.success or r.iou < iou_floor]

    @classmethod
    def from_jsonl(cls, text: str) -> "PerformanceHistory":
        hist = cls()
        for line in text.splitlines():
            if not line.strip():
                continue
            d = json.loads(line)
            pred = BBox(*d["predicted"]) if d.get("predicted") else None
            truth = BBox(*d["truth"]) if d.get("truth") else None
            hist.add(d["image_id"], d["description"], pred, truth,
                     float(d.get("iou", 0.0)), bool(d.get("success", False)))
        return hist


def _normalize(text: str) -> str:
    return " ".join(text.lower().split())


class TemplateAugmenter:
    """Deterministic description rewriter used when no language model is wired in.

    Each variant wraps the full seed description in an instruction template,
    so every content word of the seed (its head noun included) survives.
    """

    templates = ("{verb} the {desc}", "the {desc}", "find the {desc}",
                 "{verb} on the {desc}", "locate the {desc}", "the {desc} element",
                 "where is the {desc}", "{desc} control", "{verb} {desc}")
    verbs = ("click", "press", "tap", "select")

    def __init__(self, seed: int = 0):
        self.seed = seed

    def generate(self, text: str, n: int) -> list[str]:
        desc = re.sub(r"^(the|a|an)\s+", "", text.strip(), flags=re.I)
        digest = hashlib.sha256(f"{self.seed}:{desc}".encode()).digest()
        rng = random.Random(int.from_bytes(digest[:8], "big"))
        combos = sorted({t.format(verb=v, desc=desc)
                         for t in self.templates for v in self.verbs})
        rng.shuffle(combos)
        out = combos[:n]
        while len(out) < n:
            out.append(f"{combos[len(out) % len(combos)]} (variant {len(out) + 1})")
        return out


def mine_functional(history: PerformanceHistory, augmenter=None, n_variants: int = 4,
                    iou_floor: float = 0.3) -> list[ElementDescription]:
    """Augmented variants of every description the agent failed on.

    A record counts as a failure when ``success`` is false or its IoU is
    below ``iou_floor``. Repeated failures of one (image, description) pair
    seed only once. Augmenter errors skip that seed.
    """
    if n_variants < 1:
        raise ValueError("n_variants must be >= 1")
    augmenter = augmenter or TemplateAugmenter()
    seen = set()
    out = []
    for rec in history.failures(iou_floor):
        key = (rec.image_id, _normalize(rec.description))
        if key in seen:
            continue
        seen.add(key)
        try:
            variants = list(augmenter.generate(rec.description, n_variants))
            if len(variants) != n_variants:
                raise AugmenterFailure(
                    f"augmenter returned {len(variants)} variants, expected {n_variants}")
        except Exception as exc:  # augmenters are third-party code
            log.warning("augmenter failed on %r: %s", rec.description, exc)
            continue
        out.extend(ElementDescription(v, "augmented", "augmenter", rec.description, rec.image_id)
                   for v in variants)
    return out


def _refine(agent, image, description, cfg: DualLoopConfig):
    p = agent.ground(image, description)
    d_ref = agent.refer(image, p)
    n = 1
    # One grounding of the referred description per round, reused for both
    # the convergence test and the position update.
    q = agent.ground(image, d_ref)
    sim = iou(p, q)
    while sim <= cfg.tau and n <= cfg.max_iters:
        p = q
        d_ref = agent.refer(image, p)
        n += 1
        q = agent.ground(image, d_ref)
        sim = iou(p, q)
    return p, min(n, cfg.max_iters), sim


def dual_loop(agent, image, cfg: DualLoopConfig = DualLoopConfig(), image_id=None,
              targets=None, source: str = "baseline") -> SelfAnnotationSet:
    """Run the grounding/referring loop for every element of ``image``.

    ``targets`` defaults to the agent's enumeration. A target is accepted
    with its original description and its last grounded box once the next
    grounding overlaps that box by more than ``tau``; otherwise it is
    rejected with reason ``max-iterations``. ``iterations_used`` is the loop
    counter at exit (1 when the first round already agrees), capped at
    ``max_iters``. Agent errors reject only the element concerned, except
    wire-protocol violations, which propagate.
    """
    result = SelfAnnotationSet()
    if targets is None:
        try:
            targets = agent.enumerate(image)
        except ProtocolError:
            raise
        except Exception as exc:
            raise AgentFailure(f"enumerate failed: {exc}") from exc
    for d in targets:
        try:
            p, n, sim = _refine(agent, image, d, cfg)
        except ProtocolError:
            raise
        except Exception as exc:
            result.rejected.append(Rejection(d, f"agent-failure: {exc}", image_id, source))
            continue
        if sim > cfg.tau:
            result.samples.append(Sample(d, p, image_id, n, sim, source))
        else:
            result.rejected.append(Rejection(d, "max-iterations", image_id, source))
    return result


@dataclass(frozen=True, eq=False)
class Screen:
    """One corpus entry; ``handle`` is what the agent receives as ``image``."""

    image_id: str
    image: object
    handle: object = None

    @property
    def agent_handle(self):
        return self.handle if self.handle is not None else self.image_id


@dataclass
class SRDLRun:
    annotations: SelfAnnotationSet
    entropy: dict
    visual_ids: list
    functional_targets: list

    def counts(self) -> dict:
        return self.annotations.counts()


def run_srdl(corpus, agent, entropy_h_min: float, loop_cfg: DualLoopConfig = DualLoopConfig(),
             history: PerformanceHistory | None = None, augmenter=None, n_variants: int = 2,
             edge_cfg=None, include_baseline: bool = True, iou_floor: float = 0.3) -> SRDLRun:
    """Mine hard cases over ``corpus`` and run the dual loop on all of them.

    Screens whose spectral entropy exceeds ``entropy_h_min`` contribute
    their enumerated elements as visual hard cases; the remaining screens
    contribute baseline targets when ``include_baseline`` is set. Failed
    history descriptions are augmented and grounded on their source screen.
    Targets are deduplicated by (image id, normalized text), first source
    wins in the order visual, functional, baseline.
    """
    from .edges import EdgeConfig, detect_information
    from .spectral import entropy_report, select_visual_hard_cases

    if not corpus:
        raise ValueError("corpus must not be empty")
    edge_cfg = edge_cfg or EdgeConfig()
    history = history or PerformanceHistory()

    reports = {}
    for screen in corpus:
        info = detect_information(screen.image, edge_cfg)
        reports[screen.image_id] = entropy_report(info, entropy_h_min)
    visual = set(select_visual_hard_cases(list(reports.items()), entropy_h_min))

    ids = {s.image_id for s in corpus}
    mined = [d for d in mine_functional(history, augmenter, n_variants, iou_floor)
             if d.image_id in ids]

    out = SelfAnnotationSet()
    seen = set()

    def take(screen, targets, source):
        fresh = []
        for d in targets:
            key = (screen.image_id, _normalize(d.text))
            if key not in seen:
                seen.add(key)
                fresh.append(d)
        if fresh:
            out.extend(dual_loop(agent, screen.agent_handle, loop_cfg, screen.image_id,
                                 fresh, source))

    def enumerate_or_reject(screen, source):
        try:
            return agent.enumerate(screen.agent_handle)
        except ProtocolError:
            raise
        except Exception as exc:
            placeholder = ElementDescription(f"<screen {screen.image_id}>")
            out.rejected.append(Rejection(placeholder, f"agent-failure: {exc}",
                                          screen.image_id, source))
            return []

    for screen in corpus:
        if screen.image_id in visual:
            take(screen, enumerate_or_reject(screen, "visual"), "visual")
    for screen in corpus:
        take(screen, [d for d in mined if d.image_id == screen.image_id], "functional")
    if include_baseline:
        for screen in corpus:
            if screen.image_id not in visual:
                take(screen, enumerate_or_reject(screen, "baseline"), "baseline")

    return SRDLRun(out, reports, sorted(visual, key=lambda i: -reports[i].entropy), mined)
