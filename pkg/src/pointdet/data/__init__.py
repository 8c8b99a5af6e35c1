from .annotations import AnnotationError, export_annotations, image_to_png_bytes, ingest_annotations
from .preprocess import filter_large_objects, unify_resolution
from .sampling import SETTINGS, SamplingError, sample_prompts
from .scene import Annotation, PointPromptSet, Scene, SceneStats
from .stats import SCALE_BIN_WIDTH, StatsError, dataset_stats
from .synth import GenerationError, GeneratorConfig, generate_dataset, generate_scene

__all__ = [
    "AnnotationError", "export_annotations", "image_to_png_bytes", "ingest_annotations",
    "filter_large_objects", "unify_resolution",
    "SETTINGS", "SamplingError", "sample_prompts",
    "Annotation", "PointPromptSet", "Scene", "SceneStats",
    "SCALE_BIN_WIDTH", "StatsError", "dataset_stats",
    "GenerationError", "GeneratorConfig", "generate_dataset", "generate_scene",
]
