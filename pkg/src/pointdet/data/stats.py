"""Dataset statistics: object scale and density distributions."""

from __future__ import annotations

import math
from typing import Sequence

from .scene import Scene, SceneStats

SCALE_BIN_WIDTH = 4.0


class StatsError(RuntimeError):
    pass


def dataset_stats(scenes: Sequence[Scene]) -> SceneStats:
    if not scenes:
        raise StatsError("cannot compute statistics of an empty dataset")
    scales = []
    scale_hist: dict = {}
    count_hist: dict = {}
    for scene in scenes:
        count_hist[len(scene.annotations)] = count_hist.get(len(scene.annotations), 0) + 1
        for (x, y, w, h), _ in scene.annotations:
            s = math.sqrt(w * h)
            scales.append(s)
            b = math.floor(s / SCALE_BIN_WIDTH) * SCALE_BIN_WIDTH
            scale_hist[b] = scale_hist.get(b, 0) + 1
    mean_scale = sum(scales) / len(scales) if scales else 0.0
    return SceneStats(mean_scale=mean_scale,
                      scale_histogram=dict(sorted(scale_hist.items())),
                      per_image_counts=dict(sorted(count_hist.items())))
