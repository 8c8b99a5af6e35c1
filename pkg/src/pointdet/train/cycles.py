"""Cyclic prompt growth driven by the current worst prediction.

A cycle starts from minimal prompts (one point inside one box, or one per
category), runs the detector, finds the worst-covered object, and adds its
location as a new prompt — repeating K times so the model trains against
progressively richer prompt sets, biased toward its own failures.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from ..data import Scene
from ..metrics.boxes import cxcywh_to_xywh, iou
from ..model.decoder import Detection


class MatchQuality(NamedTuple):
    value: float
    score: float
    iou: float


class SelectionError(RuntimeError):
    pass


def match_quality(detection: Detection, gt_box, image_size) -> MatchQuality:
    """q = classification score x localization IoU, in [0, 1]."""
    h, w = image_size
    det_box = cxcywh_to_xywh(detection.box, w, h)
    v = iou(det_box, gt_box)
    return MatchQuality(value=detection.score * v, score=detection.score, iou=v)


@dataclass
class WorstSelection:
    gt_index: int
    point: Tuple[float, float]
    category: int
    q_values: np.ndarray          # per-GT coverage (safe) or per-detection q (literal)


def select_worst(detections: Sequence[Detection], gts, image_size,
                 policy: str = "safe") -> WorstSelection:
    """Pick the next prompt from the worst-matched object.

    ``gts`` is a list of ((x, y, w, h), category) restricted to the prompted
    categories. Safe policy: every GT gets coverage q = max over detections
    of score*IoU (0 when undetected); the argmin GT's box center becomes the
    next prompt, so prompts always stay on real objects. Literal policy: the
    lowest-q detection's center becomes the prompt instead (it may land on
    background). Ties break toward the lowest index.
    """
    if not gts:
        raise SelectionError("no ground-truth objects of the prompted categories")
    h, w = image_size

    if policy == "safe":
        q = np.zeros(len(gts))
        for j, (gt_box, _) in enumerate(gts):
            best = 0.0
            for d in detections:
                best = max(best, match_quality(d, gt_box, image_size).value)
            q[j] = best
        j = int(np.argmin(q))
        (x, y, bw, bh), cat = gts[j]
        return WorstSelection(gt_index=j, point=(x + bw / 2, y + bh / 2),
                              category=int(cat), q_values=q)

    if policy == "literal":
        if not detections:
            # nothing predicted: fall back to the least-covered GT (all zero)
            return select_worst(detections, gts, image_size, policy="safe")
        q = np.zeros(len(detections))
        best_gt = np.zeros(len(detections), dtype=np.int64)
        for i, d in enumerate(detections):
            best_iou, best_j = -1.0, 0
            for j, (gt_box, _) in enumerate(gts):
                v = match_quality(d, gt_box, image_size).iou
                if v > best_iou:
                    best_iou, best_j = v, j
            q[i] = d.score * max(best_iou, 0.0)
            best_gt[i] = best_j
        i = int(np.argmin(q))
        cx, cy = float(detections[i].box[0]), float(detections[i].box[1])
        return WorstSelection(gt_index=int(best_gt[i]),
                              point=(cx * w, cy * h),
                              category=int(gts[best_gt[i]][1]), q_values=q)

    raise ValueError(f"unknown worst-selection policy {policy!r}")


@dataclass
class CycleStep:
    k: int
    n_prompts: int
    components: dict
    selected_gt: Optional[int] = None
    n_detections: int = 0


@dataclass
class CycleState:
    kind: str                               # "intra" or "inter"
    category: Optional[int]                 # set for intra cycles
    points: np.ndarray                      # (k0 + K, 2) final prompt set
    categories: np.ndarray
    steps: List[CycleStep] = field(default_factory=list)
    loss_tensors: list = field(default_factory=list)

    @property
    def initial_size(self) -> int:
        return len(self.points) - max(len(self.steps) - 1, 0)


def _uniform_point_in_box(box, rng) -> Tuple[float, float]:
    x, y, w, h = box
    return (float(rng.uniform(x + 1e-6 * w, x + w - 1e-6 * w)),
            float(rng.uniform(y + 1e-6 * h, y + h - 1e-6 * h)))


def run_cycle(model, scene: Scene, kind: str, K: int, seed: int = 0,
              policy: str = "safe", category: Optional[int] = None,
              features=None, score_threshold: float = 0.0) -> CycleState:
    """One prompting cycle: grow the prompt set by one point per step.

    K+1 forward passes run (prompt sizes k0 .. k0+K); a loss is recorded at
    every step. When ``features`` is provided the prompt-independent
    computation is shared across steps.
    """
    if kind not in ("intra", "inter"):
        raise ValueError(f"cycle kind must be intra or inter, got {kind!r}")
    if K < 0:
        raise ValueError("K must be >= 0")
    rng = np.random.default_rng(seed)
    cats_present = scene.categories_present()
    if not cats_present:
        raise SelectionError(f"{scene.id}: scene has no annotations")

    if kind == "intra":
        if category is None:
            category = cats_present[int(rng.integers(0, len(cats_present)))]
        boxes_c = [a.box for a in scene.annotations if a.category == category]
        if not boxes_c:
            raise SelectionError(f"{scene.id}: no objects of category {category}")
        start = boxes_c[int(rng.integers(0, len(boxes_c)))]
        points = [_uniform_point_in_box(start, rng)]
        categories = [int(category)]
        prompted = {int(category)}
    else:
        points, categories = [], []
        for c in cats_present:
            boxes_c = [a.box for a in scene.annotations if a.category == c]
            start = boxes_c[int(rng.integers(0, len(boxes_c)))]
            points.append(_uniform_point_in_box(start, rng))
            categories.append(int(c))
        prompted = set(categories)

    gts = [(a.box, a.category) for a in scene.annotations if a.category in prompted]
    image_size = (scene.height, scene.width)
    if features is None:
        features = model.forward_features(scene.image)

    state = CycleState(kind=kind, category=category if kind == "intra" else None,
                       points=None, categories=None)
    for k in range(K + 1):
        total, components, out = model.loss(scene.image, np.array(points),
                                            np.array(categories), scene.annotations,
                                            image_size, features=features)
        state.loss_tensors.append(total)
        detections = out.detections(score_threshold)
        step = CycleStep(k=k, n_prompts=len(points), components=components,
                         n_detections=len(detections))
        if k < K:
            sel = select_worst(detections, gts, image_size, policy=policy)
            step.selected_gt = sel.gt_index
            points.append(sel.point)
            categories.append(sel.category)
        state.steps.append(step)
    state.points = np.asarray(points, dtype=np.float64)
    state.categories = np.asarray(categories, dtype=np.int64)
    return state
