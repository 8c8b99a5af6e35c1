"""The full point-prompted detector: features -> prompts -> density -> queries."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..autodiff import Tensor, no_grad, load_checkpoint, save_checkpoint
from .backbone import Backbone, FeaturePyramid
from .config import ModelConfig
from .decoder import DecodeOutput, Detection, QueryDecoder
from .density import DensityActivator, DensityMap, allocate_queries, build_density_target
from .enhance import EnhancedFeature, FeatureEnhancer
from .layers import Module
from .losses import compute_losses
from .matching import hungarian_match, matching_cost
from .prompting import PromptEncoder, PromptEmbedding


@dataclass
class ForwardOutput:
    pyramid: FeaturePyramid
    enhanced: EnhancedFeature
    prompt_embedding: PromptEmbedding
    density: DensityMap
    n_query: int
    decode: DecodeOutput

    def detections(self, score_threshold: float = 0.0) -> List[Detection]:
        return self.decode.detections(score_threshold)


class PointPromptedDetector(Module):
    """Detects every instance of the categories indicated by point prompts."""

    def __init__(self, config: Optional[ModelConfig] = None):
        self.config = config or ModelConfig()
        cfg = self.config
        rng = np.random.default_rng(cfg.seed)
        self.backbone = Backbone(rng, cfg.channels)
        self.enhancer = FeatureEnhancer(rng, cfg.channels, cfg.heads, cfg.ffn_mult)
        self.prompt_encoder = PromptEncoder(rng, cfg.channels, cfg.hidden, cfg.heads, cfg.ffn_mult)
        self.activator = DensityActivator(rng, cfg.channels, cfg.hidden, cfg.heads)
        self.decoder = QueryDecoder(rng, cfg.channels, cfg.hidden, cfg.heads,
                                    cfg.decoder_layers, cfg.ffn_mult, cfg.box_size_prior)

    # -- forward paths ---------------------------------------------------------

    def forward_features(self, image) -> Tuple[FeaturePyramid, EnhancedFeature]:
        """Prompt-independent half of the pipeline.

        Prompt conditioning happens purely on the enhanced map, so cycles
        that re-prompt the same image can share one feature computation
        (and one backbone subgraph in the backward pass).
        """
        img = image if isinstance(image, Tensor) else Tensor(np.asarray(image, dtype=np.float64))
        pyramid = self.backbone(img)
        enhanced = self.enhancer(pyramid)
        return pyramid, enhanced

    def forward_prompted(self, features: Tuple[FeaturePyramid, EnhancedFeature],
                         points, categories,
                         pinned_cells: Optional[np.ndarray] = None) -> ForwardOutput:
        """Prompt-dependent half: embedding, density, query decode."""
        pyramid, enhanced = features
        pe = self.prompt_encoder(points, categories, pyramid)
        dm = self.activator(pe, enhanced)
        if pinned_cells is None:
            n_query = allocate_queries(dm, self.config.n_min, self.config.n_max)
        else:
            n_query = len(pinned_cells)
        enhanced = EnhancedFeature(s3=enhanced.s3)   # fresh slot for the modulated map
        decode = self.decoder(enhanced, dm, pe, n_query, pinned_cells=pinned_cells)
        return ForwardOutput(pyramid=pyramid, enhanced=enhanced, prompt_embedding=pe,
                             density=dm, n_query=n_query, decode=decode)

    def forward(self, image, points, categories,
                pinned_cells: Optional[np.ndarray] = None) -> ForwardOutput:
        """Run the full pipeline on one image with k point prompts.

        ``image`` is (3, H, W) float in [0, 1] (numpy or Tensor); ``points``
        is (k, 2) pixel coordinates; ``categories`` the per-point tags.
        ``pinned_cells`` bypasses density-driven query seeding (used to probe
        the smooth branch of the loss in gradient checks).
        """
        return self.forward_prompted(self.forward_features(image), points, categories,
                                     pinned_cells=pinned_cells)

    def detect(self, image, points, categories,
               score_threshold: Optional[float] = None) -> Tuple[List[Detection], ForwardOutput]:
        """Inference: forward without graph recording, then threshold."""
        thr = self.config.score_threshold if score_threshold is None else score_threshold
        with no_grad():
            out = self.forward(image, points, categories)
        return out.detections(thr), out

    # -- training helpers --------------------------------------------------------

    def loss(self, image, points, categories, annotations,
             image_size: Tuple[int, int],
             features: Optional[Tuple[FeaturePyramid, EnhancedFeature]] = None,
             ) -> Tuple[Tensor, Dict[str, float], ForwardOutput]:
        """Forward plus the matched training objective for one prompt set.

        ``annotations`` is a list of ((x, y, w, h) pixels, category); only
        objects of the prompted categories supervise this pass. Passing
        precomputed ``features`` shares the prompt-independent subgraph
        across several prompt sets on the same image.
        """
        cfg = self.config
        if features is None:
            out = self.forward(image, points, categories)
        else:
            out = self.forward_prompted(features, points, categories)
        h, w = image_size
        prompted = set(int(c) for c in np.asarray(categories).reshape(-1))
        gt = [box for box, cat in annotations if int(cat) in prompted]
        gt_norm = np.zeros((len(gt), 4), dtype=np.float64)
        for i, (x, y, bw, bh) in enumerate(gt):
            gt_norm[i] = ((x + bw / 2) / w, (y + bh / 2) / h, bw / w, bh / h)

        if len(gt_norm):
            cost = matching_cost(out.decode.scores.data, out.decode.boxes.data, gt_norm,
                                 cfg.focal_alpha, cfg.focal_gamma)
            assignment = hungarian_match(cost)
        else:
            assignment = []

        gh, gw = out.density.grid.shape[1:]
        dm_target = build_density_target(annotations, prompted, out.density.stride, (gh, gw))
        total, components = compute_losses(out.decode, assignment, gt_norm, out.density,
                                           dm_target, cfg.density_weight,
                                           cfg.focal_alpha, cfg.focal_gamma,
                                           cfg.l1_weight, cfg.giou_weight)
        return total, components, out

    def pinned_loss_fn(self, image, points, categories, annotations, image_size):
        """Loss closure with the discrete decisions frozen at the base point.

        Query cells and the assignment are selection variables,
        piecewise-constant in the parameters; freezing them isolates the
        smooth branch that gradient checks probe.
        """
        cfg = self.config
        with no_grad():
            base = self.forward(image, points, categories)
        cells = base.decode.cell_indices.copy()
        h, w = image_size
        prompted = set(int(c) for c in np.asarray(categories).reshape(-1))
        gt = [box for box, cat in annotations if int(cat) in prompted]
        gt_norm = np.zeros((len(gt), 4), dtype=np.float64)
        for i, (x, y, bw, bh) in enumerate(gt):
            gt_norm[i] = ((x + bw / 2) / w, (y + bh / 2) / h, bw / w, bh / h)
        if len(gt_norm):
            cost = matching_cost(base.decode.scores.data, base.decode.boxes.data, gt_norm,
                                 cfg.focal_alpha, cfg.focal_gamma)
            assignment = hungarian_match(cost)
        else:
            assignment = []

        def loss_fn(*_):
            out = self.forward(image, points, categories, pinned_cells=cells)
            gh, gw = out.density.grid.shape[1:]
            dm_target = build_density_target(annotations, prompted, out.density.stride, (gh, gw))
            total, _ = compute_losses(out.decode, assignment, gt_norm, out.density,
                                      dm_target, cfg.density_weight,
                                      cfg.focal_alpha, cfg.focal_gamma,
                                      cfg.l1_weight, cfg.giou_weight)
            return total

        return loss_fn

    # -- persistence ---------------------------------------------------------------

    def save(self, path):
        save_checkpoint(path, self.parameters())

    def load(self, path):
        self.load_parameters(load_checkpoint(path))


def load_detector(path, config: Optional[ModelConfig] = None) -> PointPromptedDetector:
    model = PointPromptedDetector(config)
    model.load(path)
    return model
