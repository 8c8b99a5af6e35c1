"""Point prompts -> refined prompt embeddings.

Each point is bilinearly sampled from the stride-8/16/32 pyramid levels,
the three feature vectors are concatenated and projected to the model
width, and one self-attention block mixes the prompt rows. No positional
encoding over prompt index, so the embedding is permutation-equivariant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import Tensor, bilinear_sample, concat, reshape
from .backbone import FeaturePyramid
from .layers import EncoderBlock, Linear, Module


@dataclass
class PromptEmbedding:
    rows: Tensor             # (k, d)
    group_ids: np.ndarray    # (k,) int category tags


def _to_grid(coord: float, stride: int, extent: int) -> float:
    # pixel-center aligned mapping into feature-grid coordinates, clamped
    g = (coord + 0.5) / stride - 0.5
    return min(max(g, 0.0), extent - 1.0)


class PromptEncoder(Module):
    def __init__(self, rng, channels: int, hidden: int, heads: int, ffn_mult: int = 2):
        self.project = Linear(rng, 3 * channels, hidden)
        self.mixer = EncoderBlock(rng, hidden, heads, ffn_mult)

    def __call__(self, points: np.ndarray, categories: np.ndarray,
                 pyramid: FeaturePyramid) -> PromptEmbedding:
        points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        if points.shape[0] < 1:
            raise ValueError("at least one point prompt is required")
        rows = []
        levels = ((pyramid.l3, 8), (pyramid.l4, 16), (pyramid.l5, 32))
        for x, y in points:
            per_level = []
            for feat, stride in levels:
                _, fh, fw = feat.shape
                gx = _to_grid(x, stride, fw)
                gy = _to_grid(y, stride, fh)
                per_level.append(bilinear_sample(feat, gx, gy))
            rows.append(reshape(concat(per_level, axis=0), (1, -1)))
        stacked = rows[0] if len(rows) == 1 else concat(rows, axis=0)
        embedded = self.mixer(self.project(stacked))
        return PromptEmbedding(rows=embedded,
                               group_ids=np.asarray(categories, dtype=np.int64).reshape(-1))
