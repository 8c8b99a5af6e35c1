"""Box overlap and size-bucket helpers (boxes are x, y, w, h)."""

from __future__ import annotations

import math
from typing import Optional


def iou(a, b) -> float:
    """Intersection over union; 0 for disjoint or degenerate boxes."""
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    ix = min(ax + aw, bx + bw) - max(ax, bx)
    iy = min(ay + ah, by + bh) - max(ay, by)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    union = aw * ah + bw * bh - inter
    return inter / union if union > 0 else 0.0


# very-tiny / tiny / small / medium partitions of sqrt(w*h), right-open
SCALE_BUCKETS = (
    ("vt", 2.0, 8.0),
    ("t", 8.0, 16.0),
    ("s", 16.0, 32.0),
    ("m", 32.0, 64.0),
)

BUCKET_NAMES = tuple(name for name, _, _ in SCALE_BUCKETS)


def scale_bucket(box) -> Optional[str]:
    """Bucket name for sqrt(w*h), or None outside [2, 64)."""
    _, _, w, h = box
    s = math.sqrt(w * h)
    for name, lo, hi in SCALE_BUCKETS:
        if lo <= s < hi:
            return name
    return None


def cxcywh_to_xywh(box, width: float = 1.0, height: float = 1.0):
    """Normalized center-format box to absolute corner-format."""
    cx, cy, w, h = box
    return ((cx - w / 2) * width, (cy - h / 2) * height, w * width, h * height)
