"""Training objective: classification + box regression + density supervision."""

from __future__ import annotations

from typing import Dict, List, Sequence, Tuple

import numpy as np

from ..autodiff import (
    Tensor,
    absolute,
    focal_loss,
    maximum,
    minimum,
    relu,
    reshape,
    take_rows,
    tmean,
    transpose,
    tsum,
)
from .decoder import DecodeOutput
from .density import DensityMap


def giou_pairs(boxes: Tensor, gt: np.ndarray) -> Tensor:
    """Differentiable GIoU between row-aligned (n, 4) cxcywh boxes."""
    bt = transpose(boxes)
    cx, cy = take_rows(bt, [0]), take_rows(bt, [1])
    w, h = take_rows(bt, [2]), take_rows(bt, [3])
    x1, x2 = cx - w * 0.5, cx + w * 0.5
    y1, y2 = cy - h * 0.5, cy + h * 0.5

    g = np.asarray(gt, dtype=np.float64)
    gx1 = (g[:, 0] - g[:, 2] / 2)[None, :]
    gx2 = (g[:, 0] + g[:, 2] / 2)[None, :]
    gy1 = (g[:, 1] - g[:, 3] / 2)[None, :]
    gy2 = (g[:, 1] + g[:, 3] / 2)[None, :]
    g_area = (g[:, 2] * g[:, 3])[None, :]

    iw = relu(minimum(x2, gx2) - maximum(x1, gx1))
    ih = relu(minimum(y2, gy2) - maximum(y1, gy1))
    inter = iw * ih
    union = w * h + g_area - inter
    iou = inter / maximum(union, 1e-12)
    ew = maximum(x2, gx2) - minimum(x1, gx1)
    eh = maximum(y2, gy2) - minimum(y1, gy1)
    enclose = maximum(ew * eh, 1e-12)
    return iou - (enclose - union) / enclose


def compute_losses(decode: DecodeOutput,
                   assignment: Sequence[Tuple[int, int]],
                   gt_boxes: np.ndarray,
                   dm: DensityMap,
                   dm_target: np.ndarray,
                   density_weight: float = 1.0,
                   alpha: float = 0.25,
                   gamma: float = 2.0,
                   l1_weight: float = 1.0,
                   giou_weight: float = 1.0) -> Tuple[Tensor, Dict[str, float]]:
    """Total loss and per-component values.

    ``assignment`` pairs query indices with rows of ``gt_boxes`` (normalized
    cxcywh). Classification is binary focal over *all* queries (matched -> 1);
    regression is L1 + (1 - GIoU) over matched pairs (optionally reweighted);
    the density term is focal loss between the predicted grid and the
    center-cell target.
    """
    n_q = decode.scores.shape[0]
    cls_target = np.zeros(n_q, dtype=np.float64)
    for qi, _ in assignment:
        cls_target[qi] = 1.0
    l_cls = focal_loss(decode.scores, cls_target, alpha, gamma)

    if assignment:
        q_idx = [qi for qi, _ in assignment]
        g_idx = [gj for _, gj in assignment]
        matched = take_rows(decode.boxes, q_idx)
        target = np.asarray(gt_boxes, dtype=np.float64)[g_idx]
        l1 = tsum(absolute(matched - target)) * (1.0 / len(assignment))
        giou = giou_pairs(matched, target)
        l_giou = tmean(1.0 - giou)
        l_reg = l1_weight * l1 + giou_weight * l_giou
    else:
        l_reg = Tensor.zeros(1)

    grid = reshape(dm.grid, tuple(dm.grid.shape[1:]))
    l_density = focal_loss(grid, np.asarray(dm_target, dtype=np.float64), alpha, gamma)

    total = l_cls + l_reg + density_weight * l_density
    components = {
        "cls": l_cls.item(),
        "reg": l_reg.item(),
        "density": l_density.item(),
        "total": total.item(),
    }
    return total, components
