"""Parameter registry, layers, attention, and loss functions.

Modules register parameters and submodules by attribute assignment;
``named_parameters`` walks them in construction order, which makes parameter
names and checkpoint layout deterministic. All parameters initialize
uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) from an explicit Generator.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from .tensor import (
    Tensor,
    clamp_min,
    concat,
    gelu,
    log,
    matmul,
    softmax,
    swapaxes,
    take,
    tmean,
    tsum,
)

log_ = logging.getLogger(__name__)


class Parameter(Tensor):
    """A trainable leaf tensor; named when reached through a module tree."""

    __slots__ = ("name",)

    def __init__(self, data):
        super().__init__(data, requires_grad=True)
        self.name = None


def _uniform_init(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    lim = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-lim, lim, size=shape).astype(dtype)


class Module:
    """Minimal container: submodules and parameters live in ``__dict__``."""

    def named_parameters(self, prefix: str = ""):
        for key, value in vars(self).items():
            name = f"{prefix}.{key}" if prefix else key
            if isinstance(value, Parameter):
                value.name = name
                yield name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(name)
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{name}.{i}")
                    elif isinstance(item, Parameter):
                        item.name = f"{name}.{i}"
                        yield f"{name}.{i}", item

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def param_count(self) -> int:
        return sum(p.size for p in self.parameters())


class Linear(Module):
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, dtype=np.float64):
        self.weight = Parameter(_uniform_init(rng, (d_in, d_out), d_in, dtype))
        self.bias = Parameter(_uniform_init(rng, (d_out,), d_in, dtype))

    def __call__(self, x: Tensor) -> Tensor:
        return matmul(x, self.weight) + self.bias


class MLP(Module):
    """Affine - GELU - affine. Hidden width defaults to the output width."""

    def __init__(self, d_in: int, d_out: int, rng, d_hidden: int | None = None, dtype=np.float64):
        d_hidden = d_out if d_hidden is None else d_hidden
        self.fc1 = Linear(d_in, d_hidden, rng, dtype)
        self.fc2 = Linear(d_hidden, d_out, rng, dtype)

    def __call__(self, x: Tensor) -> Tensor:
        return self.fc2(gelu(self.fc1(x)))


class MultiHeadAttention(Module):
    """Scaled dot-product attention with learned q/k/v/output projections.

    Queries of width ``d_model`` attend over context tokens of width
    ``d_context``; supports arbitrary leading batch dimensions. Contains no
    positional term, so it is equivariant under query permutation and
    invariant under context permutation.
    """

    def __init__(self, d_model: int, d_context: int, heads: int, rng, dtype=np.float64):
        if d_model % heads != 0:
            raise ValueError(f"model width {d_model} not divisible by {heads} heads")
        self.heads = heads
        self.d_head = d_model // heads
        self.q_proj = Linear(d_model, d_model, rng, dtype)
        self.k_proj = Linear(d_context, d_model, rng, dtype)
        self.v_proj = Linear(d_context, d_model, rng, dtype)
        self.out_proj = Linear(d_model, d_model, rng, dtype)

    def __call__(self, queries: Tensor, context: Tensor) -> Tensor:
        q = self.q_proj(queries)
        k = self.k_proj(context)
        v = self.v_proj(context)

        *lead, tq, d = q.shape
        tc = k.shape[-2]
        h, dh = self.heads, self.d_head
        # split heads: (..., T, D) -> (..., H, T, dh)
        q = swapaxes(q.reshape(*lead, tq, h, dh), -3, -2)
        k = swapaxes(k.reshape(*lead, tc, h, dh), -3, -2)
        v = swapaxes(v.reshape(*lead, tc, h, dh), -3, -2)

        scores = matmul(q, swapaxes(k, -1, -2)) * (1.0 / math.sqrt(dh))
        attn = softmax(scores, axis=-1)
        mixed = matmul(attn, v)
        merged = swapaxes(mixed, -3, -2).reshape(*lead, tq, d)
        return self.out_proj(merged)


def self_attention(tokens: Tensor, attn: MultiHeadAttention) -> Tensor:
    return attn(tokens, tokens)


# -- losses ---------------------------------------------------------------------

LOG_EPS = 1e-12  # probability clamp before log


def l1_loss(pred: Tensor, target) -> Tensor:
    pred, target = _check_pair(pred, target, "l1")
    from .tensor import absolute

    return tmean(absolute(pred - target))


def mse_loss(pred: Tensor, target) -> Tensor:
    pred, target = _check_pair(pred, target, "mse")
    diff = pred - target
    return tmean(diff * diff)


def _check_pair(pred, target, op):
    pred = pred if isinstance(pred, Tensor) else Tensor(pred)
    target = target if isinstance(target, Tensor) else Tensor(target)
    if pred.shape != target.shape:
        from .tensor import ShapeError

        raise ShapeError(op, pred.shape, target.shape)
    return pred, target


def cross_entropy(logits: Tensor, class_ids: np.ndarray) -> Tensor:
    """Mean -log p(true class) over rows. ``logits``: (N, C), ids: (N,)."""
    class_ids = np.asarray(class_ids)
    n, c = logits.shape
    if class_ids.shape != (n,):
        raise ValueError(f"class ids shape {class_ids.shape} does not match {n} rows")
    if class_ids.min() < 0 or class_ids.max() >= c:
        raise ValueError(f"class id out of range [0, {c})")
    # stable log-sum-exp with a constant shift (no gradient through the max)
    shift = logits.data.max(axis=1, keepdims=True)
    from .tensor import exp as texp

    lse = log(tsum(texp(logits - shift), axis=1)) + Tensor(shift[:, 0])
    picked = take(logits, (np.arange(n), class_ids))
    return tmean(lse - picked)


def focal_loss(probs: Tensor, true_index: int, gamma: float = 2.0) -> Tensor:
    """-(1 - p_j)^gamma * log(p_j) on post-softmax scores."""
    k = probs.shape[-1]
    if not 0 <= true_index < k:
        raise ValueError(f"index {true_index} out of range for {k} scores")
    p = clamp_min(take(probs, true_index), LOG_EPS)
    return -((1.0 - p) ** gamma) * log(p)


def concat_tensors(tensors, axis=-1):
    return concat(tensors, axis=axis)
