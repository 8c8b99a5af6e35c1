#!/usr/bin/env python3
"""Tour of the autodiff core: build a graph, backprop, verify against finite differences."""

import numpy as np

from pointdet.autodiff import (
    Tensor, check_gradients, conv2d, focal_loss, multi_head_attention,
    sigmoid, softmax, tsum,
)

rng = np.random.default_rng(0)

# A tensor is a float64 array plus an optional gradient buffer.
x = Tensor(rng.standard_normal((4, 4)), requires_grad=True)
w = Tensor(rng.standard_normal((4, 4)) * 0.5, requires_grad=True)

loss = tsum(sigmoid(x @ w))
loss.backward()
print("loss:", loss.item())
print("dL/dx row 0:", np.round(x.grad[0], 4))

# Every differentiable op can be checked against central differences.
errs = check_gradients(lambda a, b: tsum(sigmoid(a @ b)), [x, w], h=1e-5)
print("gradcheck worst rel errors:", [f"{e:.2e}" for e in errs])

# Convolution on an NCHW image with an OIHW kernel:
img = Tensor(rng.random((1, 3, 16, 16)), requires_grad=True)
kernel = Tensor(rng.standard_normal((8, 3, 3, 3)) * 0.2, requires_grad=True)
fmap = conv2d(img, kernel, stride=2, padding=1)
print("conv output shape:", fmap.shape)

# Attention over row sequences (identity projections here):
q = Tensor(rng.standard_normal((2, 8)))
kv = Tensor(rng.standard_normal((5, 8)))
out = multi_head_attention(q, kv, kv, heads=2)
print("attention output shape:", out.shape)

# Focal loss on a probability map:
probs = sigmoid(Tensor(rng.standard_normal((8, 8)), requires_grad=True))
target = (rng.random((8, 8)) > 0.8).astype(float)
print("focal loss:", focal_loss(probs, target).item())

# Softmax rows always sum to 1:
s = softmax(Tensor(rng.standard_normal((3, 5))), axis=-1)
print("softmax row sums:", s.data.sum(axis=1))
