"""Gradient-descent updates (Adam with bias correction, plus plain SGD)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from .tensor import Tensor


class MissingGradient(RuntimeError):
    pass


@dataclass
class OptimizerConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    mode: str = "adam"          # "adam" or "sgd"
    grad_clip: float = 0.0      # global-norm clip; 0 disables


@dataclass
class _ParamState:
    step: int = 0
    m: np.ndarray = None
    v: np.ndarray = None


class Optimizer:
    """Updates a named parameter dict in place; state is per parameter name."""

    def __init__(self, params: Dict[str, Tensor], config: OptimizerConfig = None):
        self.params = dict(params)
        self.config = config or OptimizerConfig()
        self.state: Dict[str, _ParamState] = {}

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def _clip(self):
        c = self.config.grad_clip
        if c <= 0:
            return
        total = 0.0
        for p in self.params.values():
            if p.grad is not None:
                total += float(np.sum(p.grad * p.grad))
        norm = np.sqrt(total)
        if norm > c:
            scale = c / norm
            for p in self.params.values():
                if p.grad is not None:
                    p.grad *= scale

    def step(self):
        cfg = self.config
        for name, p in self.params.items():
            if p.grad is None:
                raise MissingGradient(f"parameter '{name}' has no gradient")
        self._clip()
        for name, p in self.params.items():
            g = p.grad
            if cfg.mode == "sgd":
                p.data -= cfg.lr * g
                continue
            st = self.state.get(name)
            if st is None:
                st = _ParamState(m=np.zeros_like(p.data), v=np.zeros_like(p.data))
                self.state[name] = st
            st.step += 1
            st.m = cfg.beta1 * st.m + (1.0 - cfg.beta1) * g
            st.v = cfg.beta2 * st.v + (1.0 - cfg.beta2) * (g * g)
            m_hat = st.m / (1.0 - cfg.beta1 ** st.step)
            v_hat = st.v / (1.0 - cfg.beta2 ** st.step)
            p.data -= cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps)


def optimizer_step(params: Dict[str, Tensor], grads: Dict[str, np.ndarray],
                   config: OptimizerConfig, state: Dict[str, _ParamState]):
    """Functional single step: applies ``grads`` to ``params``, mutating ``state``."""
    opt = Optimizer(params, config)
    opt.state = state
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            raise MissingGradient(f"parameter '{name}' has no gradient")
        if np.shape(g) != p.shape:
            raise MissingGradient(f"gradient for '{name}' has shape {np.shape(g)}, want {p.shape}")
        p.grad = np.asarray(g, dtype=np.float64)
    opt.step()
    for p in params.values():
        p.grad = None
    return params, state
