from .backbone import Backbone, FeaturePyramid
from .config import ModelConfig
from .decoder import DecodeOutput, Detection, QueryDecoder, top_density_cells
from .density import DensityActivator, DensityMap, allocate_queries, build_density_target
from .detector import ForwardOutput, PointPromptedDetector, load_detector
from .enhance import EnhancedFeature, FeatureEnhancer
from .losses import compute_losses, giou_pairs
from .matching import hungarian_match, matching_cost, pairwise_giou
from .prompting import PromptEmbedding, PromptEncoder

__all__ = [
    "Backbone", "FeaturePyramid", "ModelConfig",
    "DecodeOutput", "Detection", "QueryDecoder", "top_density_cells",
    "DensityActivator", "DensityMap", "allocate_queries", "build_density_target",
    "ForwardOutput", "PointPromptedDetector", "load_detector",
    "EnhancedFeature", "FeatureEnhancer",
    "compute_losses", "giou_pairs",
    "hungarian_match", "matching_cost", "pairwise_giou",
    "PromptEmbedding", "PromptEncoder",
]
