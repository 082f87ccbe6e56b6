"""Vector-graphic emission: top-down plan plots and training-loss curves.

Plan plots draw in the ego frame of the planned frame: road edges, obstacle
footprints, the expert path, the K candidate trajectories, and the selected
one emphasized. Artists carry stable SVG ids (candidate-<k>, selected,
expert) so downstream tooling can address them.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
from matplotlib.patches import Polygon

import numpy as np

from ..simworld import rect_corners, world_to_ego_2d
from ..worldmodel import PlanResult


def _road_edges_ego(road, pose, span=40.0, samples=120):
    """Left/right road edge polylines in the ego frame."""
    s = np.linspace(-5.0, span, samples)
    if abs(road.curvature) < 1e-9:
        center = np.stack([s, np.zeros_like(s)], axis=1)
        yaw = np.zeros_like(s)
    else:
        ang = road.curvature * s
        center = np.stack(
            [np.sin(ang) / road.curvature, (1.0 - np.cos(ang)) / road.curvature], axis=1
        )
        yaw = ang
    normal = np.stack([-np.sin(yaw), np.cos(yaw)], axis=1)
    half = road.width / 2.0
    return (
        world_to_ego_2d(center + half * normal, pose),
        world_to_ego_2d(center - half * normal, pose),
    )


def plot_plan(episode, plan: PlanResult, out_path) -> Path:
    """Render one PlanResult over its scene; returns the written SVG path."""
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    frame = episode.frames[plan.frame_id]
    pose = frame.ego_pose
    time_s = plan.frame_id * episode.dt

    fig, ax = plt.subplots(figsize=(6, 6))
    left, right = _road_edges_ego(episode.scene.road, pose)
    ax.plot(left[:, 0], left[:, 1], color="0.55", lw=1.0)
    ax.plot(right[:, 0], right[:, 1], color="0.55", lw=1.0)

    for i, obs in enumerate(episode.scene.obstacles):
        corners = rect_corners(obs.center_at(time_s), obs.extents, obs.heading)
        patch = Polygon(
            world_to_ego_2d(corners, pose),
            closed=True,
            facecolor="tab:gray",
            edgecolor="black",
            alpha=0.7,
        )
        patch.set_gid(f"obstacle-{i}")
        ax.add_patch(patch)

    expert = np.vstack([[0.0, 0.0], frame.expert_traj])
    (line,) = ax.plot(expert[:, 0], expert[:, 1], "g--", lw=2, label="expert")
    line.set_gid("expert")

    candidates = plan.candidates
    if candidates is None:
        candidates = plan.trajectory[None]
    for k, traj in enumerate(candidates):
        path = np.vstack([[0.0, 0.0], traj])
        (line,) = ax.plot(path[:, 0], path[:, 1], color="tab:blue", lw=0.9, alpha=0.6)
        line.set_gid(f"candidate-{k}")
    chosen = np.vstack([[0.0, 0.0], plan.trajectory])
    (line,) = ax.plot(chosen[:, 0], chosen[:, 1], color="tab:red", lw=2.5, label="selected")
    line.set_gid("selected")

    ax.plot(0, 0, "k^", markersize=9)
    ax.set_aspect("equal")
    ax.set_xlabel("forward (m)")
    ax.set_ylabel("left (m)")
    ax.set_title(
        f"frame {plan.frame_id} command {plan.command} selected {plan.selected_index}"
    )
    ax.legend(loc="upper right", fontsize=8)
    fig.savefig(out_path, format="svg")
    plt.close(fig)
    return out_path


def plot_metrics(metrics_path, out_path) -> Path:
    """Loss-component curves from a metrics JSONL log."""
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    steps, series = [], {"total": [], "sem": [], "recon": [], "score": [], "traj": []}
    with open(metrics_path) as f:
        for line in f:
            rec = json.loads(line)
            if "step" not in rec:
                continue
            steps.append(rec["step"])
            for key in series:
                series[key].append(rec.get(key, float("nan")))
    if not steps:
        raise ValueError(f"no step records found in {metrics_path}")
    fig, ax = plt.subplots(figsize=(7, 4))
    for key, values in series.items():
        (line,) = ax.plot(steps, values, lw=1.2, label=key)
        line.set_gid(f"loss-{key}")
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.legend(fontsize=8)
    fig.savefig(out_path, format="svg")
    plt.close(fig)
    return out_path
