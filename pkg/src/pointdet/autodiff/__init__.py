from .tensor import (
    ComputationTape,
    Tensor,
    absolute,
    add,
    clamp,
    concat,
    div,
    exp,
    log,
    matmul,
    max_reduce,
    maximum,
    minimum,
    mul,
    neg,
    no_grad,
    power,
    relu,
    reshape,
    sigmoid,
    silu,
    softmax,
    sqrt,
    sub,
    take_rows,
    tanh,
    tmean,
    transpose,
    tsum,
    upsample2x,
)
from .functional import (
    PROB_EPS,
    ShapeError,
    bilinear_sample,
    conv2d,
    focal_loss,
    layer_norm,
    logit,
    multi_head_attention,
)
from .gradcheck import ProbeError, check_gradients
from .optim import MissingGradient, Optimizer, OptimizerConfig, optimizer_step
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint

__all__ = [
    "ComputationTape", "Tensor", "absolute", "add", "clamp", "concat", "div", "exp", "log",
    "matmul", "max_reduce", "maximum", "minimum", "mul", "neg", "no_grad",
    "power", "relu", "reshape", "sigmoid", "silu", "softmax", "sqrt", "sub",
    "take_rows", "tanh", "tmean", "transpose", "tsum", "upsample2x",
    "PROB_EPS", "ShapeError", "bilinear_sample", "conv2d", "focal_loss",
    "layer_norm", "logit", "multi_head_attention",
    "ProbeError", "check_gradients",
    "MissingGradient", "Optimizer", "OptimizerConfig", "optimizer_step",
    "CheckpointError", "load_checkpoint", "save_checkpoint",
]
