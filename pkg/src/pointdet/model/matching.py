"""One-to-one set matching between predictions and ground truth."""

from __future__ import annotations

from typing import List, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment


def hungarian_match(cost: np.ndarray) -> List[Tuple[int, int]]:
    """Minimum-total-cost assignment of size min(n_pred, n_gt).

    Rows index predictions, columns ground truth. All entries must be finite.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ValueError(f"cost must be a matrix, got shape {cost.shape}")
    if cost.size == 0:
        return []
    if not np.isfinite(cost).all():
        raise ValueError("cost matrix contains non-finite entries")
    rows, cols = linear_sum_assignment(cost)
    return list(zip(rows.tolist(), cols.tolist()))


def _corners(boxes: np.ndarray):
    cx, cy, w, h = boxes[:, 0], boxes[:, 1], boxes[:, 2], boxes[:, 3]
    return cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2


def pairwise_giou(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Generalized IoU for all (a_i, b_j) pairs of cxcywh boxes."""
    ax1, ay1, ax2, ay2 = (v[:, None] for v in _corners(a))
    bx1, by1, bx2, by2 = _corners(b)
    iw = np.clip(np.minimum(ax2, bx2) - np.maximum(ax1, bx1), 0, None)
    ih = np.clip(np.minimum(ay2, by2) - np.maximum(ay1, by1), 0, None)
    inter = iw * ih
    area_a = ((ax2 - ax1) * (ay2 - ay1))
    area_b = ((bx2 - bx1) * (by2 - by1))
    union = area_a + area_b - inter
    iou = inter / np.maximum(union, 1e-12)
    ew = np.maximum(ax2, bx2) - np.minimum(ax1, bx1)
    eh = np.maximum(ay2, by2) - np.minimum(ay1, by1)
    enclose = np.maximum(ew * eh, 1e-12)
    return iou - (enclose - union) / enclose


def matching_cost(scores: np.ndarray, boxes: np.ndarray, gt_boxes: np.ndarray,
                  alpha: float = 0.25, gamma: float = 2.0,
                  w_cls: float = 2.0, w_l1: float = 5.0, w_giou: float = 2.0) -> np.ndarray:
    """Assignment cost: w_cls * focal-style class cost + w_l1 * L1 + w_giou * (-GIoU)."""
    s = np.clip(scores, 1e-7, 1 - 1e-7)
    pos = alpha * (1 - s) ** gamma * (-np.log(s))
    neg = (1 - alpha) * s ** gamma * (-np.log(1 - s))
    cost_cls = (pos - neg)[:, None]
    cost_l1 = np.abs(boxes[:, None, :] - gt_boxes[None, :, :]).sum(axis=2)
    cost_giou = -pairwise_giou(boxes, gt_boxes)
    return w_cls * cost_cls + w_l1 * cost_l1 + w_giou * cost_giou
