"""The composed planner: encode, plan, dream, select, score.

One training step and one inference call both run as a single batched
autodiff graph; the actual future latent used as the alignment target is
computed under no_grad with the same (shared) encoder weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..diffcore import Module, Tensor, no_grad, take, tmean
from ..diffcore.nn import l1_loss
from ..encoders import (
    ContextEncoder,
    IntentionEncoder,
    SemanticHead,
    SpatialEmbedder,
    TemporalAggregator,
    WorldLatent,
    fuse_spatial,
    semantic_loss,
)
from ..geometry import IntentionPointSet
from .heads import ActionEncoder, FutureDreamer, ScoreNet, TrajectoryDecoder
from .selector import (
    LossWeights,
    latent_distances,
    reconstruction_loss,
    score_loss,
    selected_indices,
)


@dataclass(frozen=True)
class ModelConfig:
    views: int = 3
    image_size: int = 64
    d: int = 256
    heads: int = 4
    k: int = 6
    s: int = 6
    classes: int = 5
    horizon: int = 3  # future frame interval, in frames
    dreamer_layers: int = 2
    channels: int = 3

    def __post_init__(self):
        if self.d % self.heads:
            raise ValueError(f"width {self.d} not divisible by {self.heads} heads")
        if self.image_size % ContextEncoder.DOWNSAMPLE:
            raise ValueError(f"image size {self.image_size} not divisible by 8")
        if self.horizon < 1:
            raise ValueError("future horizon must be at least one frame")

    @property
    def feature_size(self) -> int:
        return self.image_size // ContextEncoder.DOWNSAMPLE

    @property
    def tokens(self) -> int:
        return self.views * self.feature_size * self.feature_size


@dataclass
class PlanBundle:
    """Everything one planning pass produces for one frame."""

    trajectories: np.ndarray  # (K, S, 2) meters
    action_tokens: np.ndarray  # (K, D)
    predicted_future: np.ndarray  # (K, M, h, w, D)
    scores: np.ndarray  # (K,)
    selected_index: int
    distances: Optional[np.ndarray] = None  # (K,), training only


@dataclass
class PlanResult:
    """Serializable single-frame planning record.

    ``candidates`` (all K trajectories) rides along for visualization; the
    required fields are the selected trajectory, scores, and index.
    """

    frame_id: int
    command: int
    selected_index: int
    scores: np.ndarray
    trajectory: np.ndarray  # (S, 2)
    distances: Optional[np.ndarray] = None
    candidates: Optional[np.ndarray] = None  # (K, S, 2)

    def to_dict(self) -> dict:
        out = {
            "frame_id": int(self.frame_id),
            "command": int(self.command),
            "selected_index": int(self.selected_index),
            "scores": [float(x) for x in self.scores],
            "trajectory": [[float(a), float(b)] for a, b in self.trajectory],
        }
        if self.distances is not None:
            out["distances"] = [float(x) for x in self.distances]
        if self.candidates is not None:
            out["candidates"] = self.candidates.tolist()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "PlanResult":
        return cls(
            frame_id=d["frame_id"],
            command=d["command"],
            selected_index=d["selected_index"],
            scores=np.asarray(d["scores"], dtype=np.float64),
            trajectory=np.asarray(d["trajectory"], dtype=np.float64),
            distances=np.asarray(d["distances"], dtype=np.float64)
            if "distances" in d
            else None,
            candidates=np.asarray(d["candidates"], dtype=np.float64)
            if "candidates" in d
            else None,
        )


def prepare_images(images: np.ndarray, dtype) -> np.ndarray:
    """uint8 renders -> floats in [0, 1]."""
    return np.ascontiguousarray(images, dtype=dtype) / np.asarray(255.0, dtype=dtype)


class DrivingPlanner(Module):
    """Intention-conditioned latent world model planner."""

    def __init__(
        self,
        config: ModelConfig,
        intention_points: IntentionPointSet,
        rig,
        rng: np.random.Generator,
        dtype=np.float64,
    ):
        if intention_points.k != config.k:
            raise ValueError(
                f"intention set has K={intention_points.k}, config wants {config.k}"
            )
        if len(rig) != config.views:
            raise ValueError(f"rig has {len(rig)} cameras, config wants {config.views}")
        c = config
        self.backbone = ContextEncoder(c.channels, c.d, rng, dtype)
        self.sem_head = SemanticHead(c.d, c.classes, rng, dtype)
        self.spatial = SpatialEmbedder(c.d, rng, dtype)
        self.temporal = TemporalAggregator(c.d, c.heads, rng, dtype)
        self.intention = IntentionEncoder(c.d, c.heads, rng, dtype)
        self.traj_decoder = TrajectoryDecoder(c.d, c.s, c.heads, rng, dtype)
        self.action_encoder = ActionEncoder(c.d, c.s, rng, dtype)
        self.dreamer = FutureDreamer(c.d, c.heads, c.tokens, c.dreamer_layers, rng, dtype)
        self.scorenet = ScoreNet(c.d, rng, dtype)
        # non-trainable state, serialized next to the parameters
        self.config = c
        self.points = intention_points
        self.rig = rig
        self.dtype = dtype

    # -- encoding ----------------------------------------------------------------

    def encode_views(self, images: np.ndarray, depth: np.ndarray):
        """(B, M, H, W, ch) uint8 + (B, M, h, w) depth -> (features, fused)."""
        b, m, hh, ww, ch = images.shape
        pixels = Tensor(prepare_images(images, self.dtype).reshape(b * m, hh, ww, ch))
        feats = self.backbone(pixels)
        fs = self.config.feature_size
        feats = feats.reshape(b, m, fs, fs, self.config.d)
        fused = fuse_spatial(feats, self.spatial(depth, self.rig))
        return feats, fused

    def world_latent(self, fused_cur: Tensor, fused_prev: Tensor) -> Tensor:
        """(B, M, h, w, D) pair -> (B, M, h, w, D) temporal latent."""
        return self.temporal(fused_cur, fused_prev)

    def latent_tokens(self, latent: Tensor) -> Tensor:
        *lead, m, h, w, d = latent.shape
        return latent.reshape(*lead, m * h * w, d)

    # -- planning ---------------------------------------------------------------

    def plan(self, latent: Tensor, commands):
        """latent (B, M, h, w, D), commands (B,) -> dict of batched outputs."""
        tokens = self.latent_tokens(latent)
        queries = self.intention(self.points, commands)
        trajectories = self.traj_decoder(queries.tokens, tokens)
        actions = self.action_encoder(trajectories)
        predicted = self.dreamer(actions, tokens)
        scores = self.scorenet(predicted)
        return {
            "plan_queries": queries,
            "trajectories": trajectories,
            "actions": actions,
            "predicted_future": predicted,
            "scores": scores,
        }

    def encode_actual_future(self, images_prev, images_cur, depth_prev, depth_cur) -> np.ndarray:
        """Target-side latent tokens at t+n, with gradient flow blocked."""
        with no_grad():
            b = images_cur.shape[0]
            stacked_img = np.concatenate([images_prev, images_cur], axis=0)
            stacked_depth = np.concatenate([depth_prev, depth_cur], axis=0)
            _, fused = self.encode_views(stacked_img, stacked_depth)
            latent = self.world_latent(
                take(fused, slice(b, 2 * b)), take(fused, slice(0, b))
            )
            return self.latent_tokens(latent).data


@dataclass
class TrainBatch:
    """Arrays for one training step (B samples)."""

    images_prev: np.ndarray  # (B, M, H, W, ch) uint8
    images_cur: np.ndarray
    images_fut_prev: np.ndarray
    images_fut: np.ndarray
    depth_prev: np.ndarray  # (B, M, h, w) float64
    depth_cur: np.ndarray
    depth_fut_prev: np.ndarray
    depth_fut: np.ndarray
    semantics_cur: np.ndarray  # (B, M, h, w) uint8 ids with ignore label
    commands: np.ndarray  # (B,)
    expert: np.ndarray  # (B, S, 2)
    frame_ids: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))


def training_forward(model: DrivingPlanner, batch: TrainBatch, weights: LossWeights):
    """One full composed forward pass; returns (total, parts, diagnostics)."""
    b = batch.images_cur.shape[0]
    stacked_img = np.concatenate([batch.images_prev, batch.images_cur], axis=0)
    stacked_depth = np.concatenate([batch.depth_prev, batch.depth_cur], axis=0)
    feats, fused = model.encode_views(stacked_img, stacked_depth)

    feats_cur = take(feats, slice(b, 2 * b))
    fused_prev = take(fused, slice(0, b))
    fused_cur = take(fused, slice(b, 2 * b))

    _, l_sem = semantic_loss(feats_cur, model.sem_head, batch.semantics_cur)

    latent = model.world_latent(fused_cur, fused_prev)
    outputs = model.plan(latent, batch.commands)

    actual = model.encode_actual_future(
        batch.images_fut_prev, batch.images_fut, batch.depth_fut_prev, batch.depth_fut
    )
    distances = latent_distances(outputs["predicted_future"], actual)
    indices = selected_indices(distances)
    l_recon = reconstruction_loss(distances, indices)
    l_score = score_loss(outputs["scores"], indices, weights.focal_gamma)

    chosen = take(outputs["trajectories"], (np.arange(b), indices))
    l_traj = l1_loss(chosen, Tensor(batch.expert.astype(model.dtype)))

    from .selector import composite_loss

    total = composite_loss(l_sem, l_recon, l_score, l_traj, weights)
    parts = {
        "sem": l_sem.item(),
        "recon": l_recon.item(),
        "score": l_score.item(),
        "traj": l_traj.item(),
        "total": total.item(),
    }
    diag = {
        "selected": indices,
        "scores": outputs["scores"].data.copy(),
        "distances": distances.data.copy(),
    }
    return total, parts, diag


def infer_plan(frames, model: DrivingPlanner) -> PlanResult:
    """Plan from the frame stream's last observation (no future access).

    ``frames`` is an ordered sequence of past-and-present observations; the
    temporal module uses the final two (self-bootstrap when only one exists).
    """
    if not frames:
        raise ValueError("need at least the current frame")
    results = plan_frames(model, list(frames)[-2:])
    return results[-1]


def plan_frames(model: DrivingPlanner, frames) -> list:
    """Batched inference over consecutive frames of one episode.

    Frame i attends over frame i-1 (frame 0 bootstraps on itself). Returns
    one PlanResult per frame.
    """
    with no_grad():
        images = np.stack([f.images for f in frames])
        depth = np.stack([f.depth for f in frames])
        commands = np.array([int(f.command) for f in frames])
        prev_idx = np.maximum(np.arange(len(frames)) - 1, 0)

        _, fused = model.encode_views(images, depth)
        fused_prev = Tensor(fused.data[prev_idx])
        latent = model.world_latent(fused, fused_prev)
        outputs = model.plan(latent, commands)

        scores = outputs["scores"].data
        trajs = outputs["trajectories"].data
        results = []
        for i, frame in enumerate(frames):
            j = int(np.argmax(scores[i]))  # first index wins ties
            results.append(
                PlanResult(
                    frame_id=frame.t,
                    command=int(frame.command),
                    selected_index=j,
                    scores=scores[i].copy(),
                    trajectory=trajs[i, j].copy(),
                    candidates=trajs[i].copy(),
                )
            )
        return results


def plan_bundle_from_outputs(outputs, config: ModelConfig, training: bool, actual=None):
    """Collect a single-sample PlanBundle (diagnostic view of one pass)."""
    scores = outputs["scores"].data
    if scores.ndim != 1:
        raise ValueError("plan bundle expects unbatched outputs")
    fs = config.feature_size
    predicted = outputs["predicted_future"].data.reshape(
        config.k, config.views, fs, fs, config.d
    )
    distances = None
    if training:
        if actual is None:
            raise ValueError("training bundle needs the actual future latent")
        dist = latent_distances(outputs["predicted_future"], actual).data
        distances = dist
        j = int(np.argmin(dist))
    else:
        j = int(np.argmax(scores))
    return PlanBundle(
        trajectories=outputs["trajectories"].data.copy(),
        action_tokens=outputs["actions"].data.copy(),
        predicted_future=predicted.copy(),
        scores=scores.copy(),
        selected_index=j,
        distances=distances,
    )
