"""Fusion of the pyramid into one enhanced stride-8 feature map.

The coarsest level is globally mixed by a self-attention block, propagated
down through upsample-and-fuse steps, met by a downsampled copy of the
finest level, and merged by a two-convolution fusion block.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from ..autodiff import Tensor, concat, reshape, silu, transpose, upsample2x
from .backbone import FeaturePyramid
from .layers import Conv, EncoderBlock, Module


@dataclass
class EnhancedFeature:
    s3: Tensor                       # (C, H/8, W/8)
    modulated: Optional[Tensor] = None  # density-weighted copy, same shape


class FeatureEnhancer(Module):
    def __init__(self, rng, channels: int, heads: int, ffn_mult: int = 2):
        c = channels
        if c % heads:
            raise ValueError(f"channel width {c} not divisible by heads {heads}")
        self.global_block = EncoderBlock(rng, c, heads, ffn_mult)
        self.fuse_54 = Conv(rng, 2 * c, c)
        self.fuse_43 = Conv(rng, 2 * c, c)
        self.down_2 = Conv(rng, c, c, stride=2)
        self.merge1 = Conv(rng, 2 * c, c)
        self.merge2 = Conv(rng, c, c)

    def __call__(self, pyramid: FeaturePyramid) -> EnhancedFeature:
        c, h5, w5 = pyramid.l5.shape
        tokens = transpose(reshape(pyramid.l5, (c, h5 * w5)))       # (n5, C)
        l5_global = reshape(transpose(self.global_block(tokens)), (c, h5, w5))

        p4 = silu(self.fuse_54(concat([upsample2x(l5_global), pyramid.l4], axis=0)))
        p3 = silu(self.fuse_43(concat([upsample2x(p4), pyramid.l3], axis=0)))
        d2 = silu(self.down_2(pyramid.l2))
        s3 = self.merge2(silu(self.merge1(concat([p3, d2], axis=0))))
        return EnhancedFeature(s3=silu(s3))
