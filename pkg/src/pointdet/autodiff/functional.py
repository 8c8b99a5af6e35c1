"""Differentiable building blocks: convolution, attention, sampling, focal loss."""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .tensor import (
    Tensor,
    _as_tensor,
    clamp,
    concat,
    log,
    matmul,
    power,
    reshape,
    softmax,
    tmean,
    transpose,
)


class ShapeError(ValueError):
    """Raised when operand dimensions are inconsistent."""


def _im2col_indices(cin, hp, wp, kh, kw, stride):
    h_out = (hp - kh) // stride + 1
    w_out = (wp - kw) // stride + 1
    # flat indices into the padded (cin, hp, wp) volume, shape (cin*kh*kw, h_out*w_out)
    c = np.repeat(np.arange(cin), kh * kw)
    ki = np.tile(np.repeat(np.arange(kh), kw), cin)
    kj = np.tile(np.arange(kw), kh * cin)
    oy = np.repeat(np.arange(h_out) * stride, w_out)
    ox = np.tile(np.arange(w_out) * stride, h_out)
    rows = (oy[None, :] + ki[:, None]) * wp + (ox[None, :] + kj[:, None])
    return c[:, None] * (hp * wp) + rows


def conv2d(x: Tensor, kernel: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """2-D cross-correlation of NCHW input with OIHW kernel.

    Output spatial size follows (H + 2p - kh) // stride + 1. Gradients are
    produced for both input and kernel.
    """
    if stride < 1:
        raise ValueError(f"stride must be positive, got {stride}")
    if padding < 0:
        raise ValueError(f"padding must be non-negative, got {padding}")
    if x.ndim != 4 or kernel.ndim != 4:
        raise ShapeError(f"conv2d expects NCHW input and OIHW kernel, got {x.shape} and {kernel.shape}")
    n, cin, h, w = x.shape
    cout, cin_k, kh, kw = kernel.shape
    if cin != cin_k:
        raise ShapeError(f"input has {cin} channels but kernel expects {cin_k}")
    hp, wp = h + 2 * padding, w + 2 * padding
    if kh > hp or kw > wp:
        raise ShapeError(f"kernel {kh}x{kw} larger than padded input {hp}x{wp}")

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x.data
    h_out = (hp - kh) // stride + 1
    w_out = (wp - kw) // stride + 1

    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    win = win[:, :, ::stride, ::stride]                      # (n, cin, h_out, w_out, kh, kw)
    cols = np.ascontiguousarray(win.transpose(0, 1, 4, 5, 2, 3)).reshape(n, cin * kh * kw, h_out * w_out)

    wm = kernel.data.reshape(cout, cin * kh * kw)
    out_data = np.matmul(wm, cols).reshape(n, cout, h_out, w_out)

    def backward(g):
        gm = g.reshape(n, cout, h_out * w_out)
        if kernel.requires_grad:
            gw = np.matmul(gm, cols.transpose(0, 2, 1)).sum(axis=0)
            kernel.accumulate_grad(gw.reshape(kernel.shape))
        if x.requires_grad:
            dcols = np.matmul(wm.T, gm)                       # (n, cin*kh*kw, L)
            idx = _im2col_indices(cin, hp, wp, kh, kw, stride)
            flat_idx = idx.ravel()
            size = cin * hp * wp
            gx = np.empty((n, cin, hp, wp))
            for b in range(n):
                gx[b] = np.bincount(flat_idx, weights=dcols[b].ravel(), minlength=size).reshape(cin, hp, wp)
            if padding:
                gx = gx[:, :, padding:-padding, padding:-padding]
            x.accumulate_grad(gx)

    return Tensor.from_op(out_data, (x, kernel), "conv2d", backward)


def multi_head_attention(query: Tensor, key: Tensor, value: Tensor, heads: int,
                         wq: Optional[Tensor] = None, wk: Optional[Tensor] = None,
                         wv: Optional[Tensor] = None, wo: Optional[Tensor] = None) -> Tensor:
    """Scaled dot-product attention over row sequences.

    query is (k, d); key/value are (m, d_kv). Optional projection matrices map
    each operand to width d (identity when omitted, which requires d_kv == d).
    Per head: softmax(Q Kᵀ / sqrt(d/heads)) V; heads are concatenated and
    passed through the output projection.
    """
    d = query.shape[-1] if wq is None else wq.shape[-1]
    if d % heads != 0:
        raise ValueError(f"model width {d} not divisible by heads {heads}")
    q = query if wq is None else matmul(query, wq)
    k = key if wk is None else matmul(key, wk)
    v = value if wv is None else matmul(value, wv)
    if k.shape[-1] != d or v.shape[-1] != d:
        raise ShapeError(f"key/value width must be {d}; supply projections for {key.shape[-1]}")

    nq, m = q.shape[0], k.shape[0]
    dh = d // heads
    qh = transpose(reshape(q, (nq, heads, dh)), (1, 0, 2))
    kh_ = transpose(reshape(k, (m, heads, dh)), (1, 0, 2))
    vh = transpose(reshape(v, (m, heads, dh)), (1, 0, 2))

    logits = matmul(qh, transpose(kh_, (0, 2, 1))) * (1.0 / math.sqrt(dh))
    attn = softmax(logits, axis=-1)
    out = matmul(attn, vh)                                   # (heads, k, dh)
    out = reshape(transpose(out, (1, 0, 2)), (nq, d))
    return out if wo is None else matmul(out, wo)


def bilinear_sample(feature: Tensor, x: float, y: float) -> Tensor:
    """Bilinear interpolation of a (C, H, W) map at feature-grid point (x, y)."""
    if feature.ndim != 3:
        raise ShapeError(f"bilinear_sample expects (C, H, W), got {feature.shape}")
    _, h, w = feature.shape
    if not (0.0 <= x <= w - 1 and 0.0 <= y <= h - 1):
        raise ValueError(f"sample point ({x}, {y}) outside grid [0, {w - 1}] x [0, {h - 1}]")
    x0, y0 = int(math.floor(x)), int(math.floor(y))
    x1, y1 = min(x0 + 1, w - 1), min(y0 + 1, h - 1)
    wx, wy = x - x0, y - y0
    w00 = (1 - wy) * (1 - wx)
    w01 = (1 - wy) * wx
    w10 = wy * (1 - wx)
    w11 = wy * wx

    f = feature.data
    out_data = w00 * f[:, y0, x0] + w01 * f[:, y0, x1] + w10 * f[:, y1, x0] + w11 * f[:, y1, x1]

    def backward(g):
        grad = np.zeros_like(f)
        np.add.at(grad, (slice(None), y0, x0), w00 * g)
        np.add.at(grad, (slice(None), y0, x1), w01 * g)
        np.add.at(grad, (slice(None), y1, x0), w10 * g)
        np.add.at(grad, (slice(None), y1, x1), w11 * g)
        feature.accumulate_grad(grad)

    return Tensor.from_op(out_data, (feature,), "bilinear_sample", backward)


PROB_EPS = 1e-7


def focal_loss(pred: Tensor, target, alpha: float = 0.25, gamma: float = 2.0) -> Tensor:
    """Mean binary focal loss between probabilities and a {0,1} target map.

    Predictions are clamped into (PROB_EPS, 1 - PROB_EPS) before the logs.
    """
    target = _as_tensor(target)
    if pred.shape != target.shape:
        raise ShapeError(f"pred shape {pred.shape} != target shape {target.shape}")
    p = clamp(pred, PROB_EPS, 1.0 - PROB_EPS)
    one_minus_p = 1.0 - p
    pos = power(one_minus_p, gamma) * log(p) * (-alpha)
    neg = power(p, gamma) * log(one_minus_p) * (-(1.0 - alpha))
    per_elem = target * pos + (1.0 - target) * neg
    return tmean(per_elem)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-6) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine."""
    mu = tmean(x, axis=-1, keepdims=True)
    centered = x - mu
    var = tmean(centered * centered, axis=-1, keepdims=True)
    from .tensor import sqrt as tsqrt
    return centered / tsqrt(var + eps) * gain + bias


def logit(p: np.ndarray) -> np.ndarray:
    """Inverse sigmoid on plain arrays (used for reference-point anchoring)."""
    p = np.clip(p, 1e-9, 1.0 - 1e-9)
    return np.log(p / (1.0 - p))
