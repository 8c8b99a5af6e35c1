"""Detector hyperparameters."""

from __future__ import annotations

from dataclasses import dataclass, asdict


@dataclass
class ModelConfig:
    channels: int = 32            # unified backbone/fused feature width
    hidden: int = 64              # transformer width d
    heads: int = 4
    decoder_layers: int = 2
    ffn_mult: int = 2
    n_min: int = 1                # query-count clamp
    n_max: int = 300
    score_threshold: float = 0.2  # inference confidence cutoff
    focal_alpha: float = 0.25
    focal_gamma: float = 2.0
    density_weight: float = 1.0   # lambda on the density loss term
    l1_weight: float = 1.0        # box-loss term weights inside L_reg
    giou_weight: float = 1.0
    box_size_prior: float = 0.06  # initial box w/h as an image fraction
    seed: int = 0

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise KeyError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)
