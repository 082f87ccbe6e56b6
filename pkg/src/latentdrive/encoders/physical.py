"""Physical world latent encoding: context features, semantic supervision,
3D spatial embedding, and temporal aggregation.

The pluggable prior provider supplies per-pixel metric depth and semantic
class ids; at desk scale that is the simulator's exact ground truth.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from ..diffcore import (
    MLP,
    Linear,
    Module,
    MultiHeadAttention,
    Parameter,
    Tensor,
    conv2d,
    cross_entropy,
    gelu,
    take,
)
from ..geometry import pe_width, position_maps, sinusoidal_pe

log = logging.getLogger(__name__)

IGNORE_LABEL = 255


class PriorProvider(Protocol):
    """Source of spatial-semantic priors for one observation."""

    def depth_of(self, frame) -> np.ndarray:  # (M, h, w) meters, 0 where invalid
        ...

    def semantics_of(self, frame) -> np.ndarray:  # (M, h, w) ids, 255 = ignore
        ...


@dataclass
class WorldLatent:
    """Scene representation at one timestep: (M, h, w, D)."""

    latent: Tensor
    timestamp: int

    def tokens(self) -> Tensor:
        m, h, w, d = self.latent.shape
        return self.latent.reshape(m * h * w, d)


@dataclass
class SemanticLogits:
    logits: Tensor  # (..., C)
    num_classes: int


def _conv_param(rng, kh, kw, cin, cout, dtype):
    lim = 1.0 / np.sqrt(kh * kw * cin)
    return Parameter(rng.uniform(-lim, lim, size=(kh, kw, cin, cout)).astype(dtype)), Parameter(
        rng.uniform(-lim, lim, size=(cout,)).astype(dtype)
    )


class ContextEncoder(Module):
    """Small strided convolutional backbone, downsample factor 8.

    Two strided convolutions (5x5 /4 then 3x3 /2) keep the high-resolution
    activation small. Weights are shared across camera views: callers fold
    views into the batch axis.
    """

    DOWNSAMPLE = 8

    def __init__(self, in_channels: int, d: int, rng: np.random.Generator, dtype=np.float64):
        w1 = max(8, d // 2)
        self.k1, self.b1 = _conv_param(rng, 5, 5, in_channels, w1, dtype)
        self.k2, self.b2 = _conv_param(rng, 3, 3, w1, d, dtype)

    def __call__(self, images: Tensor) -> Tensor:
        """(B, H, W, ch) -> (B, H/8, W/8, D)."""
        h, w = images.shape[1], images.shape[2]
        if h % self.DOWNSAMPLE or w % self.DOWNSAMPLE:
            raise ValueError(
                f"image extents {(h, w)} not divisible by downsample factor {self.DOWNSAMPLE}"
            )
        x = gelu(conv2d(images, self.k1, stride=4, padding=2) + self.b1)
        return conv2d(x, self.k2, stride=2, padding=1) + self.b2


class SemanticHead(Module):
    """1x1 convolution (per-pixel linear map) from features to class logits."""

    def __init__(self, d: int, num_classes: int, rng, dtype=np.float64):
        self.proj = Linear(d, num_classes, rng, dtype)
        self.num_classes = num_classes

    def __call__(self, features: Tensor) -> SemanticLogits:
        return SemanticLogits(self.proj(features), self.num_classes)


def semantic_loss(
    features: Tensor, head: SemanticHead, targets: np.ndarray, ignore_label: int = IGNORE_LABEL
):
    """Mean cross-entropy over non-ignored pixels; returns (logits, scalar)."""
    sem = head(features)
    targets = np.asarray(targets)
    if sem.logits.shape[:-1] != targets.shape:
        raise ValueError(
            f"semantic targets {targets.shape} do not match features {sem.logits.shape[:-1]}"
        )
    c = head.num_classes
    flat_logits = sem.logits.reshape(-1, c)
    flat_ids = targets.reshape(-1)
    keep = np.flatnonzero(flat_ids != ignore_label)
    if keep.size == 0:
        log.warning("semantic loss: every pixel carries the ignore label; loss is 0")
        return sem, Tensor(np.zeros(()))
    picked = take(flat_logits, keep)
    return sem, cross_entropy(picked, flat_ids[keep].astype(np.int64))


class SpatialEmbedder(Module):
    """Positional embedding from back-projected pixel positions.

    depth -> ego-frame position maps -> sinusoidal encoding -> learned MLP.
    """

    def __init__(self, d: int, rng, dtype=np.float64):
        self.pe_dim = pe_width(3, d)
        self.embed = MLP(self.pe_dim, d, rng, d_hidden=d, dtype=dtype)
        self._dtype = dtype

    def __call__(self, depth: np.ndarray, rig) -> Tensor:
        """(M, h, w) or (B, M, h, w) depth -> same leading shape + (D,)."""
        depth = np.asarray(depth)
        if depth.ndim == 3:
            pos = position_maps(depth, rig)
        elif depth.ndim == 4:
            pos = np.stack([position_maps(d, rig) for d in depth])
        else:
            raise ValueError(f"depth must be 3- or 4-dimensional, got {depth.shape}")
        encoded = sinusoidal_pe(pos, self.pe_dim).astype(self._dtype)
        return self.embed(Tensor(encoded))


def fuse_spatial(features: Tensor, embedding: Tensor) -> Tensor:
    """Add the spatial positional embedding onto the image features."""
    if features.shape != embedding.shape:
        from ..diffcore import ShapeError

        raise ShapeError("fuse_spatial", features.shape, embedding.shape)
    return features + embedding


class TemporalAggregator(Module):
    """Cross-attention of current feature tokens over the previous frame's.

    At t=0 callers pass the current features as the previous ones
    (self-bootstrap).
    """

    def __init__(self, d: int, heads: int, rng, dtype=np.float64):
        self.attn = MultiHeadAttention(d, d, heads, rng, dtype=dtype)

    def __call__(self, current: Tensor, previous: Tensor) -> Tensor:
        if current.shape != previous.shape:
            from ..diffcore import ShapeError

            raise ShapeError("temporal_aggregate", current.shape, previous.shape)
        *lead, m, h, w, d = current.shape
        tokens = m * h * w
        cur = current.reshape(*lead, tokens, d)
        prev = previous.reshape(*lead, tokens, d)
        out = self.attn(cur, prev)
        return out.reshape(*lead, m, h, w, d)
