"""World model selector: latent distances, modality choice, loss composition.

Training selects the modality whose predicted future latent is closest (MSE)
to the actual future latent and uses that distance as the reconstruction
loss; gradient never flows into the target side. Ties break to the lowest
index for determinism.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..diffcore import Tensor, clamp_min, log, take, tmean
from ..diffcore.nn import LOG_EPS


@dataclass(frozen=True)
class LossWeights:
    """Composite loss weights; defaults are the published constants."""

    alpha: float = 0.2  # semantic
    beta: float = 0.2  # reconstruction
    gamma: float = 0.5  # score
    eta: float = 1.0  # trajectory imitation
    focal_gamma: float = 2.0  # focusing exponent of the score loss


def latent_distances(predicted: Tensor, actual) -> Tensor:
    """Mean-squared distance per intention: (.., K, T, D) vs (.., T, D) -> (.., K).

    The target is detached: alignment trains the predictor, not the target.
    """
    target = actual.data if isinstance(actual, Tensor) else np.asarray(actual)
    target = np.expand_dims(target, -3)  # broadcast over the K axis
    diff = predicted - Tensor(target)
    return (diff * diff).mean(axis=(-1, -2))


def select_modality(predicted: Tensor, actual):
    """Single-sample selection: returns (j, distances (K,), recon scalar)."""
    distances = latent_distances(predicted, actual)
    if distances.ndim != 1:
        raise ValueError(f"expected one sample, got distances of shape {distances.shape}")
    j = int(np.argmin(distances.data))  # argmin takes the first on ties
    return j, distances, take(distances, j)


def selected_indices(distances: Tensor) -> np.ndarray:
    """Batched argmin with lowest-index tie-break: (B, K) -> (B,)."""
    return distances.data.argmin(axis=-1)


def reconstruction_loss(distances: Tensor, indices: np.ndarray) -> Tensor:
    """Mean over the batch of each sample's selected latent distance."""
    b = distances.shape[0]
    return tmean(take(distances, (np.arange(b), indices)))


def score_loss(scores: Tensor, indices, focal_gamma: float = 2.0) -> Tensor:
    """Focal loss between softmax scores and the selected indices.

    Accepts a (K,) score vector with an int index or a (B, K) batch with a
    (B,) index array; returns the batch mean.
    """
    if scores.ndim == 1:
        scores = scores.reshape(1, -1)
        indices = np.array([indices])
    b = scores.shape[0]
    p = clamp_min(take(scores, (np.arange(b), np.asarray(indices))), LOG_EPS)
    losses = -((1.0 - p) ** focal_gamma) * log(p)
    return tmean(losses)


def composite_loss(l_sem, l_recon, l_score, l_traj, weights: LossWeights = LossWeights()):
    """Weighted sum of the four scalar components."""
    parts = []
    for name, value in (("sem", l_sem), ("recon", l_recon), ("score", l_score), ("traj", l_traj)):
        t = value if isinstance(value, Tensor) else Tensor(np.asarray(value, dtype=np.float64))
        if t.size != 1:
            raise ValueError(f"loss component '{name}' must be scalar, got shape {t.shape}")
        parts.append(t)
    sem, recon, score, traj = parts
    return (
        weights.alpha * sem
        + weights.beta * recon
        + weights.gamma * score
        + weights.eta * traj
    )
