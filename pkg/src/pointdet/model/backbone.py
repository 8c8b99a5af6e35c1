"""Four-stage strided CNN producing a feature pyramid at strides 4/8/16/32."""

from __future__ import annotations

from dataclasses import dataclass

from ..autodiff import Tensor, silu
from .layers import Conv, Module


@dataclass
class FeaturePyramid:
    l2: Tensor   # (C, H/4,  W/4)
    l3: Tensor   # (C, H/8,  W/8)
    l4: Tensor   # (C, H/16, W/16)
    l5: Tensor   # (C, H/32, W/32)


class Backbone(Module):
    """Plain stack of stride-2 conv blocks with a unified channel width."""

    def __init__(self, rng, channels: int):
        c = channels
        self.stem = Conv(rng, 3, c, stride=2)
        self.stage1 = Conv(rng, c, c, stride=2)   # -> stride 4
        self.refine1 = Conv(rng, c, c, stride=1)
        self.stage2 = Conv(rng, c, c, stride=2)   # -> stride 8
        self.stage3 = Conv(rng, c, c, stride=2)   # -> stride 16
        self.stage4 = Conv(rng, c, c, stride=2)   # -> stride 32

    def __call__(self, image: Tensor) -> FeaturePyramid:
        _, h, w = image.shape
        if h % 32 or w % 32:
            raise ValueError(
                f"image dims {h}x{w} must be divisible by 32; pad the input first")
        x = silu(self.stem(image))
        l2 = silu(self.refine1(silu(self.stage1(x))))
        l3 = silu(self.stage2(l2))
        l4 = silu(self.stage3(l3))
        l5 = silu(self.stage4(l4))
        return FeaturePyramid(l2=l2, l3=l3, l4=l4, l5=l5)
