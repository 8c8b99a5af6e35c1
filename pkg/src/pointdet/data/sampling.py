"""Prompt sampling for the four inference protocols.

S1: one instance per category present, prompt at its (jittered) center.
S2: every instance prompts.
S3: one random category, one random instance of it.
S4: one random category, all of its instances.
"""

from __future__ import annotations

from typing import List, Optional

import numpy as np

from .scene import PointPromptSet, Scene

SETTINGS = ("S1", "S2", "S3", "S4")


class SamplingError(RuntimeError):
    pass


def _jittered_center(box, jitter: float, rng: np.random.Generator):
    x, y, w, h = box
    cx = x + w / 2.0 + (rng.uniform(-jitter, jitter) * w if jitter > 0 else 0.0)
    cy = y + h / 2.0 + (rng.uniform(-jitter, jitter) * h if jitter > 0 else 0.0)
    # jitter < 0.5 already keeps the point interior; the clip is a guard
    eps_x, eps_y = 1e-6 * w, 1e-6 * h
    return (float(np.clip(cx, x + eps_x, x + w - eps_x)),
            float(np.clip(cy, y + eps_y, y + h - eps_y)))


def sample_prompts(scene: Scene, setting: str, seed: int = 0,
                   jitter: float = 0.0,
                   category: Optional[int] = None,
                   limit: Optional[int] = None) -> PointPromptSet:
    """Draw a prompt set per the protocol; deterministic given the seed.

    ``jitter`` displaces each prompt from the box center by a uniform
    fraction of the box size per axis (must stay below 0.5 so prompts stay
    inside their boxes). ``category`` overrides the random category draw
    for S3/S4. ``limit`` caps the number of prompts for S2/S4 by uniform
    subsampling (how prompt-count ablations vary the budget).
    """
    if setting not in SETTINGS:
        raise ValueError(f"unknown setting {setting!r}; expected one of {SETTINGS}")
    if not (0.0 <= jitter < 0.5):
        raise ValueError(f"jitter must be in [0, 0.5), got {jitter}")
    if not scene.annotations:
        raise SamplingError(f"{scene.id}: cannot sample prompts from an empty scene")

    rng = np.random.default_rng(seed)
    by_category = {}
    for i, a in enumerate(scene.annotations):
        by_category.setdefault(a.category, []).append(i)
    cats = sorted(by_category)

    def pick_category() -> int:
        if category is not None:
            if category not in by_category:
                raise SamplingError(f"{scene.id}: no objects of category {category}")
            return category
        return cats[int(rng.integers(0, len(cats)))]

    chosen: List[int] = []
    if setting == "S1":
        for c in cats:
            idxs = by_category[c]
            chosen.append(idxs[int(rng.integers(0, len(idxs)))])
    elif setting == "S2":
        chosen = list(range(len(scene.annotations)))
    elif setting == "S3":
        c = pick_category()
        idxs = by_category[c]
        chosen = [idxs[int(rng.integers(0, len(idxs)))]]
    else:  # S4
        c = pick_category()
        chosen = list(by_category[c])

    if limit is not None and setting in ("S2", "S4") and len(chosen) > limit:
        picked = rng.choice(len(chosen), size=limit, replace=False)
        chosen = [chosen[i] for i in sorted(picked)]

    points, categories = [], []
    for i in chosen:
        a = scene.annotations[i]
        points.append(_jittered_center(a.box, jitter, rng))
        categories.append(a.category)
    return PointPromptSet(points=np.array(points), categories=np.array(categories),
                          setting=setting, seed=seed)
