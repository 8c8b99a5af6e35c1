"""Class-agnostic average precision with 101-point PR interpolation."""

from __future__ import annotations

from typing import List, Optional, Sequence, Tuple

import numpy as np

from .boxes import iou, scale_bucket

N_INTERP = 101


def _greedy_match(detections, gts_by_image, iou_threshold):
    """Match score-ordered detections to the best unmatched GT per image.

    Returns, per detection (in score order), the matched (image, gt index)
    or None. Ties in score keep insertion order; ties in IoU take the lower
    GT index.
    """
    order = np.argsort([-d[2] for d in detections], kind="stable")
    matched_flags = {img: [False] * len(boxes) for img, boxes in gts_by_image.items()}
    matches: List[Optional[Tuple[str, int]]] = [None] * len(order)
    for rank, di in enumerate(order):
        img, box, _ = detections[di]
        gt_boxes = gts_by_image.get(img, [])
        best_iou, best_j = iou_threshold, -1
        for j, gt_box in enumerate(gt_boxes):
            if matched_flags[img][j]:
                continue
            v = iou(box, gt_box)
            if v > best_iou or (v == best_iou and best_j == -1 and v >= iou_threshold):
                best_iou, best_j = v, j
        if best_j >= 0:
            matched_flags[img][best_j] = True
            matches[rank] = (img, best_j)
    return order, matches


def compute_ap(detections: Sequence[Tuple[str, tuple, float]],
               gts: Sequence[Tuple[str, tuple]],
               iou_threshold: float,
               scale_filter: Optional[str] = None) -> Tuple[float, int]:
    """AP over a pooled detection/GT set.

    ``detections`` are (image_id, box xywh, score); ``gts`` are
    (image_id, box). With ``scale_filter``, only GTs in that bucket count
    toward recall, and detections matched to out-of-bucket GTs are ignored
    (neither TP nor FP). Returns (ap, n_gt_considered); ap is 0 when no GT
    falls in scope (callers flag that case).
    """
    gts_by_image: dict = {}
    buckets_by_image: dict = {}
    for img, box in gts:
        gts_by_image.setdefault(img, []).append(box)
        buckets_by_image.setdefault(img, []).append(scale_bucket(box))

    if scale_filter is None:
        n_gt = len(gts)
    else:
        n_gt = sum(b == scale_filter for bs in buckets_by_image.values() for b in bs)
    if n_gt == 0:
        return 0.0, 0
    if not detections:
        return 0.0, n_gt

    order, matches = _greedy_match(detections, gts_by_image, iou_threshold)
    tp_flags: List[bool] = []
    for rank in range(len(order)):
        m = matches[rank]
        if m is None:
            tp_flags.append(False)           # false positive
            continue
        img, j = m
        if scale_filter is not None and buckets_by_image[img][j] != scale_filter:
            continue                          # ignored: matched out-of-bucket GT
        tp_flags.append(True)

    if not tp_flags:
        return 0.0, n_gt
    tp = np.cumsum(tp_flags, dtype=np.int64)
    fp = np.cumsum([not t for t in tp_flags], dtype=np.int64)
    precision = tp / (tp + fp)

    # recall >= i/100 as exact integer comparison so the brute-force oracle
    # reproduces the same masks bit for bit
    ap = 0.0
    for i in range(N_INTERP):
        mask = 100 * tp >= i * n_gt
        ap += float(precision[mask].max()) if mask.any() else 0.0
    return ap / N_INTERP, n_gt
