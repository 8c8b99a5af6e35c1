"""Prompt-conditioned density map and query budgeting.

Prompt embeddings cross-attend into the enhanced feature map to produce
one dynamic 1x1 kernel per prompt; each kernel is correlated with the
feature map, the per-prompt response maps are fused by elementwise max,
and a 3x3 convolution + sigmoid turns the fused response into a
single-channel density grid. The grid's spatial integral sets the decoder
query count, and the grid itself gates the features fed to the decoder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..autodiff import Tensor, conv2d, matmul, max_reduce, reshape, sigmoid, transpose
from .enhance import EnhancedFeature
from .layers import Attention, Linear, Module
from .prompting import PromptEmbedding


@dataclass
class DensityMap:
    grid: Tensor      # (1, H/8, W/8), values in [0, 1]
    stride: int = 8

    def total(self) -> float:
        return float(self.grid.data.sum())


class DensityActivator(Module):
    def __init__(self, rng, channels: int, hidden: int, heads: int):
        self.cross = Attention(rng, hidden, heads, kv_width=channels)
        self.to_kernel = Linear(rng, hidden, channels)
        self.out_conv_w = Tensor(rng.uniform(-1, 1, (1, 1, 3, 3)) * math.sqrt(6.0 / 9.0),
                                 requires_grad=True)
        # negative bias keeps the initial density sparse
        self.out_conv_b = Tensor(np.full((1, 1, 1), -2.0), requires_grad=True)
        self._scale = 1.0 / math.sqrt(channels)

    def __call__(self, pe: PromptEmbedding, enhanced: EnhancedFeature) -> DensityMap:
        c, gh, gw = enhanced.s3.shape
        tokens = transpose(reshape(enhanced.s3, (c, gh * gw)))        # (L, C)
        kernels = self.to_kernel(self.cross(pe.rows, tokens, tokens))  # (k, C)
        responses = matmul(kernels, reshape(enhanced.s3, (c, gh * gw))) * self._scale
        fused = max_reduce(reshape(responses, (-1, gh, gw)), axis=0)   # (gh, gw)
        logits = conv2d(reshape(fused, (1, 1, gh, gw)), self.out_conv_w, 1, 1)
        grid = sigmoid(reshape(logits, (1, gh, gw)) + self.out_conv_b)
        return DensityMap(grid=grid)


def allocate_queries(dm: DensityMap, n_min: int, n_max: int) -> int:
    """Query count = density integral, rounded half-up, clamped to [n_min, n_max]."""
    if n_min > n_max:
        raise ValueError(f"n_min {n_min} > n_max {n_max}")
    n = int(math.floor(dm.total() + 0.5))
    return max(n_min, min(n_max, n))


def build_density_target(annotations, prompted_categories, stride: int,
                         grid_shape) -> np.ndarray:
    """Binary center-cell indicator over the density grid.

    Each ground-truth box of a prompted category marks the cell containing
    its center; colliding centers clamp to 1.
    """
    gh, gw = grid_shape
    target = np.zeros((gh, gw), dtype=np.float64)
    prompted = set(int(c) for c in prompted_categories)
    for box, category in annotations:
        if int(category) not in prompted:
            continue
        x, y, w, h = box
        cx, cy = x + w / 2.0, y + h / 2.0
        j = min(max(int(cx // stride), 0), gw - 1)
        i = min(max(int(cy // stride), 0), gh - 1)
        target[i, j] = 1.0
    return target
