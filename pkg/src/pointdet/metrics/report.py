"""Report rendering: text table and machine-readable record file."""

from __future__ import annotations

import json
from pathlib import Path

from .evaluation import EvalReport


def format_report(report: EvalReport) -> str:
    lines = [
        f"setting {report.setting}  ({report.n_images} images)",
        "  IoU     AP",
    ]
    for thr, ap in sorted(report.ap_by_iou.items()):
        lines.append(f"  {thr:.2f}   {ap:6.4f}")
    lines.append("  scale   AP@0.50")
    for name, ap in report.ap_by_scale.items():
        flag = "  (no GT)" if name in report.empty_buckets else ""
        lines.append(f"  {name:4s}   {ap:6.4f}{flag}")
    return "\n".join(lines)


def save_report(report: EvalReport, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report.to_dict(), indent=1, sort_keys=True))
    return path
