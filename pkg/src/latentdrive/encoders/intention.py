"""Intention encoder: ego query + intention point embeddings -> plan queries."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..diffcore import MLP, Module, MultiHeadAttention, Parameter, Tensor
from ..geometry import IntentionPointSet, pe_width, sinusoidal_pe


@dataclass
class PlanningQuery:
    """K intention-conditioned query tokens for one driving command."""

    tokens: Tensor  # (..., K, D)
    command: np.ndarray  # command id(s), scalar or (batch,)


class IntentionEncoder(Module):
    """Builds plan queries by self-attention over ego + intention embeddings.

    Row k of the output corresponds one-to-one with the active command's
    k-th intention point; permuting the points permutes the rows.
    """

    def __init__(self, d: int, heads: int, rng: np.random.Generator, dtype=np.float64):
        self.d = d
        self.pe_dim = pe_width(2, d)
        lim = 1.0 / np.sqrt(d)
        self.ego_query = Parameter(rng.uniform(-lim, lim, size=d).astype(dtype))
        self.point_embed = MLP(self.pe_dim, d, rng, d_hidden=d, dtype=dtype)
        self.mixer = MultiHeadAttention(d, d, heads, rng, dtype=dtype)

    def __call__(self, intents: IntentionPointSet, command) -> PlanningQuery:
        """command: int or (batch,) array; output tokens (..., K, D)."""
        command = np.asarray(command)
        points = intents.points[command]  # (K, 2) or (B, K, 2)
        encoded = sinusoidal_pe(points, self.pe_dim)
        intent_tokens = self.point_embed(Tensor(encoded.astype(self.ego_query.dtype)))
        tokens = intent_tokens + self.ego_query  # ego query broadcast to all K rows
        mixed = self.mixer(tokens, tokens)
        return PlanningQuery(tokens=mixed, command=command)
