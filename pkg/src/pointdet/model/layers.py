"""Parameter containers and the small layer zoo the detector is built from."""

from __future__ import annotations

import math
from typing import Dict, Iterator, Tuple

import numpy as np

from ..autodiff import Tensor, conv2d, layer_norm, matmul, multi_head_attention, silu


class Module:
    """Minimal parameter-tree container with named, checkpointable leaves."""

    def __setattr__(self, name, value):
        if isinstance(value, Tensor) and value.requires_grad:
            self.__dict__.setdefault("_params", {})[name] = value
        elif isinstance(value, Module):
            self.__dict__.setdefault("_children", {})[name] = value
        object.__setattr__(self, name, value)

    def parameters(self, prefix: str = "") -> Dict[str, Tensor]:
        out: Dict[str, Tensor] = {}
        for name, p in self.__dict__.get("_params", {}).items():
            out[prefix + name] = p
        for name, child in self.__dict__.get("_children", {}).items():
            out.update(child.parameters(prefix + name + "."))
        return out

    def load_parameters(self, values: Dict[str, np.ndarray], strict: bool = True):
        params = self.parameters()
        missing = set(params) - set(values)
        extra = set(values) - set(params)
        if strict and (missing or extra):
            raise KeyError(f"parameter mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for name, p in params.items():
            if name in values:
                arr = np.asarray(values[name], dtype=np.float64)
                if arr.shape != p.shape:
                    raise ValueError(f"parameter '{name}' has shape {arr.shape}, model wants {p.shape}")
                p.data = arr.copy()


class ModuleList(Module):
    def __init__(self, modules):
        self.items = list(modules)
        for i, m in enumerate(modules):
            self.__dict__.setdefault("_children", {})[str(i)] = m

    def __iter__(self) -> Iterator[Module]:
        return iter(self.items)

    def __len__(self):
        return len(self.items)


def _kaiming_uniform(rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = math.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Conv(Module):
    """3x3/1x1 convolution with bias. Weight layout OIHW."""

    def __init__(self, rng, c_in, c_out, kernel=3, stride=1, padding=None, weight_scale=1.0):
        self.stride = stride
        self.padding = kernel // 2 if padding is None else padding
        fan_in = c_in * kernel * kernel
        self.weight = Tensor(_kaiming_uniform(rng, (c_out, c_in, kernel, kernel), fan_in) * weight_scale,
                             requires_grad=True)
        self.bias = Tensor(np.zeros((c_out, 1, 1)), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        # x is (C, H, W); conv2d works on NCHW
        out = conv2d(x.reshape((1,) + tuple(x.shape)), self.weight, self.stride, self.padding)
        return out.reshape(tuple(out.shape[1:])) + self.bias


class Linear(Module):
    def __init__(self, rng, d_in, d_out, weight_scale=1.0, bias_init=0.0):
        self.weight = Tensor(_kaiming_uniform(rng, (d_in, d_out), d_in) * weight_scale, requires_grad=True)
        self.bias = Tensor(np.full((d_out,), float(bias_init)), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return matmul(x, self.weight) + self.bias


class LayerNorm(Module):
    def __init__(self, width):
        self.gain = Tensor(np.ones((width,)), requires_grad=True)
        self.bias = Tensor(np.zeros((width,)), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return layer_norm(x, self.gain, self.bias)


class Attention(Module):
    """Multi-head attention with learned projections (query width d)."""

    def __init__(self, rng, d, heads, kv_width=None):
        kv = kv_width or d
        self.heads = heads
        self.wq = Tensor(_kaiming_uniform(rng, (d, d), d), requires_grad=True)
        self.wk = Tensor(_kaiming_uniform(rng, (kv, d), kv), requires_grad=True)
        self.wv = Tensor(_kaiming_uniform(rng, (kv, d), kv), requires_grad=True)
        self.wo = Tensor(_kaiming_uniform(rng, (d, d), d), requires_grad=True)

    def __call__(self, q: Tensor, k: Tensor, v: Tensor) -> Tensor:
        return multi_head_attention(q, k, v, self.heads,
                                    wq=self.wq, wk=self.wk, wv=self.wv, wo=self.wo)


class FeedForward(Module):
    def __init__(self, rng, d, mult=2):
        self.fc1 = Linear(rng, d, d * mult)
        self.fc2 = Linear(rng, d * mult, d)

    def __call__(self, x: Tensor) -> Tensor:
        return self.fc2(silu(self.fc1(x)))


class EncoderBlock(Module):
    """Pre-norm self-attention encoder block over a row sequence (n, d)."""

    def __init__(self, rng, d, heads, ffn_mult=2):
        self.norm1 = LayerNorm(d)
        self.attn = Attention(rng, d, heads)
        self.norm2 = LayerNorm(d)
        self.ffn = FeedForward(rng, d, ffn_mult)

    def __call__(self, x: Tensor) -> Tensor:
        h = self.norm1(x)
        x = x + self.attn(h, h, h)
        return x + self.ffn(self.norm2(x))


class DecoderBlock(Module):
    """Query self-attention, cross-attention into memory tokens, feed-forward."""

    def __init__(self, rng, d, heads, memory_width, ffn_mult=2):
        self.norm1 = LayerNorm(d)
        self.self_attn = Attention(rng, d, heads)
        self.norm2 = LayerNorm(d)
        self.cross_attn = Attention(rng, d, heads, kv_width=memory_width)
        self.norm3 = LayerNorm(d)
        self.ffn = FeedForward(rng, d, ffn_mult)

    def __call__(self, q: Tensor, memory: Tensor) -> Tensor:
        h = self.norm1(q)
        q = q + self.self_attn(h, h, h)
        q = q + self.cross_attn(self.norm2(q), memory, memory)
        return q + self.ffn(self.norm3(q))
