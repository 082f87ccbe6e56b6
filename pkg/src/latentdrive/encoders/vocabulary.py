"""Candidate trajectory bank and per-command intention points.

The vocabulary is a fixed set of constant-speed, constant-curvature arcs
sampled over a seeded (speed, curvature) distribution. Trajectories are
partitioned into the three driving commands by the lateral displacement of
their endpoints, and each command's endpoints are clustered into K intention
points.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ..geometry import IntentionPointSet, kmeans


class Command(enum.IntEnum):
    LEFT = 0
    STRAIGHT = 1
    RIGHT = 2

    @classmethod
    def from_name(cls, name: str) -> "Command":
        try:
            return cls[name.upper()]
        except KeyError:
            raise ValueError(f"unknown command '{name}'") from None


@dataclass(frozen=True)
class TrajectoryVocabulary:
    """(N, S, 2) waypoint bank, meters, ego frame, time-ordered."""

    trajectories: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.trajectories, dtype=np.float64)
        if t.ndim != 3 or t.shape[2] != 2:
            raise ValueError(f"vocabulary must be (N, S, 2), got {t.shape}")
        first = np.linalg.norm(t[:, 0, :], axis=1)
        if first.size and first.max() > 3.0:
            raise ValueError("first waypoint must lie within 3 m of the origin")
        object.__setattr__(self, "trajectories", t)

    @property
    def n(self) -> int:
        return self.trajectories.shape[0]

    @property
    def s(self) -> int:
        return self.trajectories.shape[1]

    def endpoints(self) -> np.ndarray:
        return self.trajectories[:, -1, :]


def arc_waypoints(speed: float, curvature: float, s: int, dt: float) -> np.ndarray:
    """Constant-speed, constant-curvature arc sampled at s ticks of dt seconds.

    Ego convention: x forward, y left; positive curvature turns left.
    """
    times = dt * np.arange(1, s + 1)
    arc = speed * times
    if abs(curvature) < 1e-9:
        return np.stack([arc, np.zeros_like(arc)], axis=1)
    ang = curvature * arc
    return np.stack([np.sin(ang) / curvature, (1.0 - np.cos(ang)) / curvature], axis=1)


def generate_vocabulary(
    n: int = 8192,
    s: int = 6,
    seed: int = 0,
    dt: float = 0.5,
    speed_range: tuple = (0.5, 6.0),
    max_curvature: float = 0.15,
) -> TrajectoryVocabulary:
    """Seeded vocabulary of N arcs; speeds capped so waypoint 1 stays near origin."""
    if speed_range[1] * dt > 3.0:
        raise ValueError("top speed would put the first waypoint farther than 3 m out")
    rng = np.random.default_rng(seed)
    speeds = rng.uniform(*speed_range, size=n)
    curvatures = rng.uniform(-max_curvature, max_curvature, size=n)
    trajs = np.stack(
        [arc_waypoints(v, k, s, dt) for v, k in zip(speeds, curvatures)], axis=0
    )
    return TrajectoryVocabulary(trajs)


def partition_by_command(
    vocab: TrajectoryVocabulary, lateral_threshold: float = 2.0
) -> dict:
    """Split trajectory indices into commands by endpoint lateral displacement."""
    y_end = vocab.endpoints()[:, 1]
    return {
        Command.LEFT: np.flatnonzero(y_end > lateral_threshold),
        Command.STRAIGHT: np.flatnonzero(np.abs(y_end) <= lateral_threshold),
        Command.RIGHT: np.flatnonzero(y_end < -lateral_threshold),
    }


def build_intention_points(
    vocab: TrajectoryVocabulary,
    k: int = 6,
    seed: int = 0,
    lateral_threshold: float = 2.0,
) -> IntentionPointSet:
    """Cluster each command's trajectory endpoints into K intention points."""
    parts = partition_by_command(vocab, lateral_threshold)
    endpoints = vocab.endpoints()
    points = np.empty((3, k, 2), dtype=np.float64)
    for cmd in Command:
        idx = parts[cmd]
        if len(idx) < k:
            raise ValueError(
                f"command {cmd.name} has only {len(idx)} trajectories, need >= {k}"
            )
        points[int(cmd)] = kmeans(endpoints[idx], k, seed=[seed, int(cmd)])
    return IntentionPointSet(points)
