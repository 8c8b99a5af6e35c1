"""Dataset preprocessing: the large-object filter and resolution unification."""

from __future__ import annotations

from typing import List

import numpy as np

from .scene import Annotation, Scene


def filter_large_objects(scene: Scene, threshold: float = 0.40) -> bool:
    """True = keep. Drop when any single object covers more than
    ``threshold`` of the image area (strict inequality at the boundary)."""
    image_area = scene.width * scene.height
    for (x, y, w, h), _ in scene.annotations:
        if w * h > threshold * image_area:
            return False
    return True


def _tile_starts(size: int, target: int) -> List[int]:
    if size <= target:
        return [0]
    starts = list(range(0, size - target, target))
    starts.append(size - target)
    return starts


def unify_resolution(scene: Scene, target: int = 1024,
                     clip_survival: float = 0.25) -> List[Scene]:
    """Cut or pad a scene into target x target tiles.

    Oversized axes are tiled with the last tile anchored to the far edge
    (tiles may overlap); undersized axes are zero-padded bottom/right.
    Boxes are clipped per tile and dropped when the clipped area falls
    below ``clip_survival`` of the original.
    """
    h, w = scene.height, scene.width
    tiles = []
    for oy in _tile_starts(h, target):
        for ox in _tile_starts(w, target):
            crop = scene.image[:, oy:oy + target, ox:ox + target]
            ch, cw = crop.shape[1], crop.shape[2]
            if ch < target or cw < target:
                padded = np.zeros((3, target, target), dtype=crop.dtype)
                padded[:, :ch, :cw] = crop
                crop = padded
            annots = []
            for (x, y, bw, bh), cat in scene.annotations:
                nx1 = max(x - ox, 0.0)
                ny1 = max(y - oy, 0.0)
                nx2 = min(x + bw - ox, float(target))
                ny2 = min(y + bh - oy, float(target))
                nw, nh = nx2 - nx1, ny2 - ny1
                if nw <= 0 or nh <= 0:
                    continue
                if nw * nh < clip_survival * bw * bh:
                    continue
                annots.append(Annotation(box=(nx1, ny1, nw, nh), category=cat))
            suffix = "" if (h <= target and w <= target) else f"_x{ox}_y{oy}"
            tiles.append(Scene(image=np.ascontiguousarray(crop), annotations=annots,
                               id=scene.id + suffix))
    return tiles
