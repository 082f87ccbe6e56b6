"""Trajectory generation, action encoding, future-latent prediction, scoring."""

from __future__ import annotations

import numpy as np

from ..diffcore import (
    MLP,
    Linear,
    Module,
    MultiHeadAttention,
    Parameter,
    Tensor,
    broadcast_to,
    concat,
    gelu,
    matmul,
    softmax,
)


class TrajectoryDecoder(Module):
    """Plan queries attend over latent tokens; a shared per-intention MLP head
    maps each token to S waypoints."""

    def __init__(self, d: int, s: int, heads: int, rng, dtype=np.float64):
        self.attn = MultiHeadAttention(d, d, heads, rng, dtype=dtype)
        self.head = MLP(d, s * 2, rng, d_hidden=d, dtype=dtype)
        self.s = s

    def __call__(self, plan_tokens: Tensor, latent_tokens: Tensor) -> Tensor:
        """(.., K, D) x (.., T, D) -> (.., K, S, 2) meters."""
        mixed = self.attn(plan_tokens, latent_tokens)
        flat = self.head(mixed)
        *lead, k, _ = mixed.shape
        return flat.reshape(*lead, k, self.s, 2)


class ActionEncoder(Module):
    """Shared MLP from flattened waypoints to one action token per intention."""

    def __init__(self, d: int, s: int, rng, dtype=np.float64):
        self.mlp = MLP(s * 2, d, rng, d_hidden=d, dtype=dtype)
        self.s = s

    def __call__(self, trajectories: Tensor) -> Tensor:
        """(.., K, S, 2) -> (.., K, D)."""
        *lead, k, s, _ = trajectories.shape
        return self.mlp(trajectories.reshape(*lead, k, s * 2))


class FutureDreamer(Module):
    """Predicts one future latent per intention.

    For each intention its action token is broadcast onto every spatial
    token, concatenated channel-wise with the current latent, and projected
    back down; a shared learned query bank then runs multi-layer
    cross-attention over that context. Weights are shared across intentions,
    so identical action tokens produce identical predictions.
    """

    def __init__(self, d: int, heads: int, n_tokens: int, layers: int, rng, dtype=np.float64):
        lim = 1.0 / np.sqrt(d)
        self.future_query = Parameter(
            rng.uniform(-lim, lim, size=(n_tokens, d)).astype(dtype)
        )
        self.fuse = Linear(2 * d, d, rng, dtype)
        self.layers = [MultiHeadAttention(d, d, heads, rng, dtype=dtype) for _ in range(layers)]

    def __call__(self, actions: Tensor, latent_tokens: Tensor) -> Tensor:
        """(.., K, D) x (.., T, D) -> (.., K, T, D)."""
        *lead, k, d = actions.shape
        t = latent_tokens.shape[-2]
        act = broadcast_to(actions.reshape(*lead, k, 1, d), (*lead, k, t, d))
        lat = broadcast_to(latent_tokens.reshape(*lead, 1, t, d), (*lead, k, t, d))
        context = self.fuse(concat([act, lat], axis=-1))
        x = broadcast_to(self.future_query, (*lead, k, t, d))
        for layer in self.layers:
            x = layer(x, context)
        return x


class ScoreNet(Module):
    """Classification network over predicted latents: pool, 2-layer MLP, softmax.

    The final projection carries no bias: a shared offset on every
    intention's logit cannot move the softmax and would be a dead parameter.
    """

    def __init__(self, d: int, rng, dtype=np.float64):
        self.fc1 = Linear(d, d, rng, dtype)
        lim = 1.0 / np.sqrt(d)
        self.proj = Parameter(rng.uniform(-lim, lim, size=(d, 1)).astype(dtype))

    def logits(self, predicted: Tensor) -> Tensor:
        """(.., K, T, D) -> per-intention logits (.., K)."""
        pooled = predicted.mean(axis=-2)
        raw = matmul(gelu(self.fc1(pooled)), self.proj)
        *lead, k, _ = raw.shape
        return raw.reshape(*lead, k)

    def __call__(self, predicted: Tensor) -> Tensor:
        """(.., K, T, D) -> scores (.., K), nonnegative, summing to 1."""
        return softmax(self.logits(predicted), axis=-1)
