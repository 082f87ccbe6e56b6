"""Training loop: sample frames, compose the loss, step, log, checkpoint.

Everything is deterministic under the run seed: model init, vocabulary and
intention clustering, and batch sampling all derive from it. The metrics log
is append-only JSONL so crashed runs stay analyzable, and a rolling
checkpoint is kept so a NaN abort still leaves the last good state on disk.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..diffcore import build_optimizer, load_model, save_model
from ..encoders import build_intention_points, generate_vocabulary
from ..geometry import IntentionPointSet
from ..simworld import read_corpus
from ..worldmodel import DrivingPlanner, TrainBatch, training_forward
from .config import ConfigError, RunConfig, config_hash, config_to_dict

log = logging.getLogger(__name__)

CHECKPOINT_NAME = "checkpoint.bin"
METRICS_NAME = "metrics.jsonl"
RUN_META_NAME = "run_meta.json"


class TrainingDivergedError(RuntimeError):
    """Loss went non-finite; the last good checkpoint remains on disk."""


@dataclass
class TrainState:
    model: DrivingPlanner
    optimizer: object
    rng: np.random.Generator
    step: int
    loss_history: list


def build_intentions(cfg: RunConfig) -> IntentionPointSet:
    vocab = generate_vocabulary(
        n=cfg.n_vocab,
        s=cfg.s,
        seed=[cfg.seed, 101],
        speed_range=(cfg.vocab_speed_min, cfg.vocab_speed_max),
        max_curvature=cfg.vocab_max_curvature,
    )
    return build_intention_points(
        vocab, k=cfg.k, seed=[cfg.seed, 102], lateral_threshold=cfg.lateral_threshold
    )


def build_model(cfg: RunConfig, rig, intention_points=None) -> DrivingPlanner:
    points = build_intentions(cfg) if intention_points is None else intention_points
    rng = np.random.default_rng([cfg.seed, 100])
    return DrivingPlanner(cfg.model_config(), points, rig, rng, dtype=cfg.dtype)


def _check_corpus_matches(cfg: RunConfig, episodes) -> None:
    frame = episodes[0].frames[0]
    m, hh, ww, _ = frame.images.shape
    if (m, hh, ww) != (cfg.views, cfg.image_size, cfg.image_size):
        raise ConfigError(
            f"corpus frames are {m} views at {hh}x{ww}, config wants "
            f"{cfg.views} views at {cfg.image_size}x{cfg.image_size}"
        )
    if frame.expert_traj.shape[0] != cfg.s:
        raise ConfigError(
            f"corpus expert horizon S={frame.expert_traj.shape[0]}, config wants {cfg.s}"
        )
    fs = episodes[0].rig[0].h
    if fs != cfg.image_size // 8:
        raise ConfigError(
            f"corpus feature grid {fs} does not match image size {cfg.image_size} / 8"
        )


def sample_space(cfg: RunConfig, episodes) -> list:
    """All trainable (episode, frame) pairs: real previous frame, future in range."""
    pairs = []
    for e, ep in enumerate(episodes):
        for t in range(1, ep.n_frames - cfg.horizon_n):
            pairs.append((e, t))
    if not pairs:
        raise ConfigError("corpus has no trainable frames for this horizon")
    return pairs


def assemble_batch(cfg: RunConfig, episodes, picks) -> TrainBatch:
    n = cfg.horizon_n

    def gather(field, offsets):
        return np.stack(
            [getattr(episodes[e].frames[t + off], field) for (e, t), off in zip(picks, offsets)]
        )

    zero = [0] * len(picks)
    prev = [-1] * len(picks)
    fut = [n] * len(picks)
    fut_prev = [n - 1] * len(picks)
    return TrainBatch(
        images_prev=gather("images", prev),
        images_cur=gather("images", zero),
        images_fut_prev=gather("images", fut_prev),
        images_fut=gather("images", fut),
        depth_prev=gather("depth", prev),
        depth_cur=gather("depth", zero),
        depth_fut_prev=gather("depth", fut_prev),
        depth_fut=gather("depth", fut),
        semantics_cur=gather("semantics", zero),
        commands=np.array([episodes[e].frames[t].command for e, t in picks]),
        expert=gather("expert_traj", zero),
        frame_ids=np.array([t for _, t in picks], dtype=np.int64),
    )


def save_checkpoint(path, model: DrivingPlanner, optimizer, cfg: RunConfig, step: int, rng):
    meta = {
        "config": config_to_dict(cfg),
        "config_hash": config_hash(cfg),
        "seed": cfg.seed,
        "step": step,
        "optimizer": cfg.optimizer,
        "rng_state": json.loads(json.dumps(rng.bit_generator.state)),
    }
    extras = dict(optimizer.state_arrays())
    extras["intention_points"] = model.points.points
    list(model.named_parameters())  # ensure names are assigned
    save_model(path, model, meta, extra_arrays=extras)


def load_checkpoint(path, cfg: RunConfig, rig):
    """Rebuild the model from a checkpoint; dims must match the config."""
    from ..diffcore import CheckpointError, load_archive

    arrays, meta = load_archive(path)
    stored_hash = meta.get("config_hash")
    if stored_hash is not None and stored_hash != config_hash(cfg):
        raise CheckpointError(
            f"checkpoint was trained with config hash {stored_hash}, "
            f"current config hashes to {config_hash(cfg)}"
        )
    points = IntentionPointSet(arrays["intention_points"].reshape(3, cfg.k, 2))
    model = build_model(cfg, rig, intention_points=points)
    meta, extras = load_model(path, model)
    return model, meta, extras


def train(cfg: RunConfig, corpus_dir, out_dir, resume_from=None) -> TrainState:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    episodes = read_corpus(corpus_dir)
    _check_corpus_matches(cfg, episodes)
    rig = episodes[0].rig

    rng = np.random.default_rng([cfg.seed, 1])
    start_step = 0
    if resume_from is not None:
        model, meta, extras = load_checkpoint(resume_from, cfg, rig)
        optimizer = build_optimizer(cfg.optimizer, model.parameters(), cfg.lr)
        optimizer.load_state_arrays(
            {k: v for k, v in extras.items() if k.startswith("optim.")}
        )
        rng.bit_generator.state = meta["rng_state"]
        start_step = meta["step"]
    else:
        model = build_model(cfg, rig)
        optimizer = build_optimizer(cfg.optimizer, model.parameters(), cfg.lr)

    pairs = sample_space(cfg, episodes)
    weights = cfg.loss_weights()
    ckpt_path = out_dir / CHECKPOINT_NAME
    metrics_path = out_dir / METRICS_NAME

    with open(out_dir / RUN_META_NAME, "w") as f:
        json.dump(
            {
                "config": config_to_dict(cfg),
                "config_hash": config_hash(cfg),
                "optimizer": cfg.optimizer,  # adaptive family is a local choice
                "corpus": str(corpus_dir),
                "trainable_frames": len(pairs),
            },
            f,
            indent=2,
            sort_keys=True,
        )

    save_checkpoint(ckpt_path, model, optimizer, cfg, start_step, rng)
    history = []
    mode = "a" if resume_from is not None else "w"
    with open(metrics_path, mode) as metrics_file:
        for step in range(start_step + 1, cfg.steps + 1):
            picks = [pairs[i] for i in rng.integers(0, len(pairs), size=cfg.batch_size)]
            batch = assemble_batch(cfg, episodes, picks)
            total, parts, _ = training_forward(model, batch, weights)
            if not np.isfinite(parts["total"]):
                raise TrainingDivergedError(
                    f"non-finite loss at step {step}; last good checkpoint: {ckpt_path}"
                )
            model.zero_grad()
            total.backward()
            optimizer.step()
            history.append(parts)
            record = {"step": step, **parts}
            metrics_file.write(json.dumps(record) + "\n")
            if step % cfg.log_every == 0:
                metrics_file.flush()
                log.info(
                    "step %d total %.4f (sem %.4f recon %.4f score %.4f traj %.4f)",
                    step, parts["total"], parts["sem"], parts["recon"],
                    parts["score"], parts["traj"],
                )
            if cfg.checkpoint_every and step % cfg.checkpoint_every == 0:
                save_checkpoint(ckpt_path, model, optimizer, cfg, step, rng)
    save_checkpoint(ckpt_path, model, optimizer, cfg, cfg.steps, rng)
    return TrainState(model=model, optimizer=optimizer, rng=rng, step=cfg.steps, loss_history=history)
