"""Detection-dataset interchange: images/annotations/categories JSON + PNGs.

The on-disk layout is one ``annotations.json`` next to an ``images/``
directory of lossless 8-bit RGB files. Export then ingest preserves boxes,
categories, and scene ids exactly.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import List, Sequence

import numpy as np
from PIL import Image

from .scene import Annotation, Scene


class AnnotationError(RuntimeError):
    pass


def image_to_png_bytes(image: np.ndarray) -> bytes:
    from io import BytesIO
    buf = BytesIO()
    _to_pil(image).save(buf, format="PNG")
    return buf.getvalue()


def _to_pil(image: np.ndarray) -> Image.Image:
    arr = np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)
    return Image.fromarray(arr.transpose(1, 2, 0), mode="RGB")


def _from_pil(img: Image.Image) -> np.ndarray:
    arr = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
    return np.ascontiguousarray(arr.transpose(2, 0, 1))


def export_annotations(scenes: Sequence[Scene], root) -> Path:
    """Write a dataset directory; returns the annotation file path."""
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    images, annotations = [], []
    categories = set()
    ann_id = 0
    for idx, scene in enumerate(scenes):
        file_name = f"{scene.id}.png"
        _to_pil(scene.image).save(root / "images" / file_name)
        images.append({"id": idx, "file_name": file_name,
                       "width": scene.width, "height": scene.height})
        for (x, y, w, h), cat in scene.annotations:
            annotations.append({"id": ann_id, "image_id": idx,
                                "bbox": [x, y, w, h], "category_id": int(cat),
                                "area": w * h})
            categories.add(int(cat))
            ann_id += 1
    payload = {
        "images": images,
        "annotations": annotations,
        "categories": [{"id": c, "name": f"category_{c}"} for c in sorted(categories)],
    }
    out = root / "annotations.json"
    out.write_text(json.dumps(payload, sort_keys=True, indent=1))
    return out


def ingest_annotations(path) -> List[Scene]:
    """Read a dataset directory (or its annotations.json) back into scenes."""
    path = Path(path)
    ann_file = path / "annotations.json" if path.is_dir() else path
    if not ann_file.exists():
        raise AnnotationError(f"annotation file not found: {ann_file}")
    try:
        payload = json.loads(ann_file.read_text())
    except json.JSONDecodeError as e:
        raise AnnotationError(f"{ann_file}: malformed JSON at line {e.lineno}: {e.msg}") from e
    for key in ("images", "annotations", "categories"):
        if key not in payload:
            raise AnnotationError(f"{ann_file}: missing top-level '{key}' list")

    declared = {c["id"] for c in payload["categories"]}
    image_dir = ann_file.parent / "images"
    by_image = {}
    for rec in payload["annotations"]:
        by_image.setdefault(rec["image_id"], []).append(rec)

    scenes = []
    for rec in payload["images"]:
        img_path = image_dir / rec["file_name"]
        if not img_path.exists():
            raise AnnotationError(f"image file missing: {img_path}")
        image = _from_pil(Image.open(img_path))
        w, h = rec["width"], rec["height"]
        if image.shape[1] != h or image.shape[2] != w:
            raise AnnotationError(
                f"{img_path}: file is {image.shape[2]}x{image.shape[1]}, "
                f"annotation record says {w}x{h}")
        annots = []
        for a in sorted(by_image.get(rec["id"], []), key=lambda r: r["id"]):
            x, y, bw, bh = a["bbox"]
            if a["category_id"] not in declared:
                raise AnnotationError(
                    f"annotation id {a['id']}: undeclared category {a['category_id']}")
            if x < 0 or y < 0 or x + bw > w or y + bh > h or bw < 1 or bh < 1:
                raise AnnotationError(
                    f"annotation id {a['id']} (image {rec['file_name']}): "
                    f"box {a['bbox']} violates bounds {w}x{h}")
            annots.append(Annotation(box=(float(x), float(y), float(bw), float(bh)),
                                     category=int(a["category_id"])))
        scenes.append(Scene(image=image, annotations=annots,
                            id=Path(rec["file_name"]).stem))
    return scenes
