"""Scene and prompt containers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, NamedTuple, Tuple

import numpy as np


class Annotation(NamedTuple):
    box: Tuple[float, float, float, float]   # x, y, w, h in pixels
    category: int


@dataclass
class Scene:
    """One image plus its ground-truth boxes."""

    image: np.ndarray                  # (3, H, W) float64 in [0, 1]
    annotations: List[Annotation]
    id: str

    @property
    def height(self) -> int:
        return self.image.shape[1]

    @property
    def width(self) -> int:
        return self.image.shape[2]

    def categories_present(self) -> List[int]:
        return sorted({a.category for a in self.annotations})

    def validate(self):
        h, w = self.height, self.width
        for i, (box, cat) in enumerate(self.annotations):
            x, y, bw, bh = box
            if bw < 1 or bh < 1:
                raise ValueError(f"{self.id}: annotation {i} degenerate size {bw}x{bh}")
            if x < 0 or y < 0 or x + bw > w or y + bh > h:
                raise ValueError(f"{self.id}: annotation {i} box {box} outside {w}x{h}")
        return self


@dataclass
class PointPromptSet:
    """Inference-time point prompts with their category tags."""

    points: np.ndarray                 # (k, 2) pixel x, y
    categories: np.ndarray             # (k,) int
    setting: str = "S1"                # S1 | S2 | S3 | S4
    seed: int = 0

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)
        self.categories = np.asarray(self.categories, dtype=np.int64).reshape(-1)
        if self.points.shape[0] != self.categories.shape[0]:
            raise ValueError("points and categories length mismatch")
        if self.points.shape[0] < 1:
            raise ValueError("a prompt set needs at least one point")

    def __len__(self):
        return self.points.shape[0]


@dataclass
class SceneStats:
    mean_scale: float                        # mean sqrt(w*h), pixels
    scale_histogram: dict = field(default_factory=dict)   # bin lower edge -> count (width 4)
    per_image_counts: dict = field(default_factory=dict)  # object count -> image count
