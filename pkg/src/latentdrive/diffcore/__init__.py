"""Tensor autodiff substrate: arrays, layers, losses, optimizers, checkpoints."""

from .tensor import (
    ShapeError,
    Tensor,
    absolute,
    broadcast_to,
    clamp_min,
    concat,
    conv2d,
    exp,
    gelu,
    get_default_dtype,
    grad_enabled,
    log,
    matmul,
    no_grad,
    reshape,
    set_default_dtype,
    softmax,
    swapaxes,
    take,
    tanh,
    tmean,
    tsum,
)
from .nn import (
    MLP,
    Linear,
    Module,
    MultiHeadAttention,
    Parameter,
    cross_entropy,
    focal_loss,
    l1_loss,
    mse_loss,
    self_attention,
)
from .optim import SGD, Adam, build_optimizer
from .checkpoint import (
    CheckpointError,
    load_archive,
    load_model,
    save_archive,
    save_model,
)

__all__ = [
    "Tensor",
    "Parameter",
    "Module",
    "Linear",
    "MLP",
    "MultiHeadAttention",
    "ShapeError",
    "CheckpointError",
    "SGD",
    "Adam",
    "build_optimizer",
    "no_grad",
    "grad_enabled",
    "set_default_dtype",
    "get_default_dtype",
    "matmul",
    "softmax",
    "conv2d",
    "gelu",
    "tanh",
    "exp",
    "log",
    "absolute",
    "clamp_min",
    "concat",
    "broadcast_to",
    "reshape",
    "swapaxes",
    "take",
    "tsum",
    "tmean",
    "self_attention",
    "l1_loss",
    "mse_loss",
    "cross_entropy",
    "focal_loss",
    "save_archive",
    "load_archive",
    "save_model",
    "load_model",
]
