from .ap import N_INTERP, compute_ap
from .boxes import BUCKET_NAMES, SCALE_BUCKETS, cxcywh_to_xywh, iou, scale_bucket
from .evaluation import (
    IOU_THRESHOLDS,
    EvalReport,
    EvaluationError,
    collect_detections,
    cross_category_fraction,
    evaluate_setting,
    scene_seed,
)
from .report import format_report, save_report

__all__ = [
    "N_INTERP", "compute_ap",
    "BUCKET_NAMES", "SCALE_BUCKETS", "cxcywh_to_xywh", "iou", "scale_bucket",
    "IOU_THRESHOLDS", "EvalReport", "EvaluationError", "collect_detections",
    "cross_category_fraction", "evaluate_setting", "scene_seed",
    "format_report", "save_report",
]
