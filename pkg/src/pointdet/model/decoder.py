"""Density-gated feature modulation and query decoding.

The enhanced map is multiplied by the density grid, the top density cells
seed query reference points, the gated features at those cells become the
content queries, and a small decoder stack predicts a per-query objectness
score plus a box around each reference point.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np

from ..autodiff import Tensor, matmul, reshape, sigmoid, take_rows, transpose
from ..autodiff.functional import logit
from .density import DensityMap
from .enhance import EnhancedFeature
from .layers import DecoderBlock, Linear, Module, ModuleList
from .prompting import PromptEmbedding


@dataclass
class Detection:
    box: np.ndarray       # (cx, cy, w, h) normalized to [0, 1]
    score: float
    prompt_group: int


@dataclass
class DecodeOutput:
    """Differentiable decode results plus bookkeeping for training."""
    scores: Tensor                 # (n_q,)
    boxes: Tensor                  # (n_q, 4) cxcywh normalized
    query_features: Tensor         # (n_q, d)
    reference_points: np.ndarray   # (n_q, 2) normalized cx, cy
    cell_indices: np.ndarray       # (n_q,) flat density-grid cells
    prompt_groups: np.ndarray      # (n_q,) best-affinity category per query
    warnings: List[str] = field(default_factory=list)

    def detections(self, score_threshold: float = 0.0) -> List[Detection]:
        out = []
        for i in range(self.scores.shape[0]):
            s = float(self.scores.data[i])
            if s >= score_threshold:
                out.append(Detection(box=self.boxes.data[i].copy(), score=s,
                                     prompt_group=int(self.prompt_groups[i])))
        return out


def top_density_cells(grid: np.ndarray, n: int) -> np.ndarray:
    """Indices of the n highest cells, ties broken by row-major order."""
    flat = grid.reshape(-1)
    order = np.argsort(-flat, kind="stable")
    return order[:n]


class QueryDecoder(Module):
    def __init__(self, rng, channels: int, hidden: int, heads: int, layers: int,
                 ffn_mult: int = 2, box_size_prior: float = 0.06):
        self.content_proj = Linear(rng, channels, hidden)
        self.blocks = ModuleList([DecoderBlock(rng, hidden, heads, channels, ffn_mult)
                                  for _ in range(layers)])
        self.score_head = Linear(rng, hidden, 1, weight_scale=1e-2, bias_init=-1.0)
        self.box_head = Linear(rng, hidden, 4, weight_scale=1e-2)
        self.box_head.bias.data[2:] = logit(np.array([box_size_prior, box_size_prior]))

    def __call__(self, enhanced: EnhancedFeature, dm: DensityMap,
                 pe: PromptEmbedding, n_query: int,
                 pinned_cells: np.ndarray = None) -> DecodeOutput:
        if n_query < 1:
            raise ValueError("n_query must be >= 1")
        c, gh, gw = enhanced.s3.shape
        warnings: List[str] = []
        if n_query > gh * gw:
            warnings.append(f"n_query {n_query} exceeds {gh * gw} grid cells; clamped")
            n_query = gh * gw

        modulated = enhanced.s3 * dm.grid
        enhanced.modulated = modulated
        tokens = transpose(reshape(modulated, (c, gh * gw)))          # (L, C)

        cells = top_density_cells(dm.grid.data, n_query) if pinned_cells is None else pinned_cells
        refs = np.stack([(cells % gw + 0.5) / gw, (cells // gw + 0.5) / gh], axis=1)

        q = self.content_proj(take_rows(tokens, cells))
        for block in self.blocks:
            q = block(q, tokens)

        scores = sigmoid(reshape(self.score_head(q), (-1,)))
        raw = self.box_head(q)                                        # (n_q, 4)
        raw_t = transpose(raw)                                        # (4, n_q)
        ref_logit = logit(refs)                                       # (n_q, 2)
        cx = sigmoid(take_rows(raw_t, [0]) + ref_logit[:, 0][None, :])
        cy = sigmoid(take_rows(raw_t, [1]) + ref_logit[:, 1][None, :])
        w = sigmoid(take_rows(raw_t, [2]))
        h = sigmoid(take_rows(raw_t, [3]))
        from ..autodiff import concat
        boxes = transpose(concat([cx, cy, w, h], axis=0))             # (n_q, 4)

        groups = _affinity_groups(q.data, pe)
        return DecodeOutput(scores=scores, boxes=boxes, query_features=q,
                            reference_points=refs, cell_indices=cells,
                            prompt_groups=groups, warnings=warnings)


def _affinity_groups(query_feats: np.ndarray, pe: PromptEmbedding) -> np.ndarray:
    """Tag each query with the category of its max-cosine prompt row."""
    pr = pe.rows.data
    qn = query_feats / np.maximum(np.linalg.norm(query_feats, axis=1, keepdims=True), 1e-12)
    pn = pr / np.maximum(np.linalg.norm(pr, axis=1, keepdims=True), 1e-12)
    best = np.argmax(qn @ pn.T, axis=1)
    return pe.group_ids[best]
