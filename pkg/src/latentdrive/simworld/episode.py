"""Scripted episode generation: ego kinematics, obstacles, rendered frames.

Ego motion is a constant-speed straight line or constant-curvature arc
(optionally slowed by a lead obstacle); obstacles are rejection-sampled so
the expert path never collides. Everything is deterministic given the seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..encoders import Command
from ..geometry import CameraModel, front_camera_rotation
from .metrics import EGO_LENGTH, EGO_WIDTH, rects_overlap
from .render import render_frame
from .scene import (
    CLASS_BARRIER,
    CLASS_PEDESTRIAN,
    CLASS_VEHICLE,
    Obstacle,
    Road,
    Scene,
)


class GenerationError(ValueError):
    pass


@dataclass(frozen=True)
class GenConfig:
    dt: float = 0.5
    n_frames: int = 40
    views: int = 3
    image_size: int = 64
    feature_size: int = 8
    s: int = 6  # expert horizon waypoints (2 Hz over 3 s)
    speed_range: tuple = (3.0, 5.0)
    turn_curvature: float = 0.08
    curvature_jitter: float = 0.015
    road_width: float = 7.0
    n_obstacles: tuple = (2, 6)
    moving_fraction: float = 0.3
    obstacle_speed: tuple = (0.4, 1.2)
    maneuver_mix: tuple = (1 / 3, 1 / 3, 1 / 3)
    slowdown: bool = False
    cam_yaws_deg: tuple = (0.0, 55.0, -55.0)
    cam_height: float = 1.5
    cam_forward: float = 1.0
    hfov_deg: float = 70.0

    def to_dict(self) -> dict:
        from dataclasses import asdict

        d = asdict(self)
        for key, value in d.items():
            if isinstance(value, tuple):
                d[key] = list(value)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GenConfig":
        kwargs = dict(d)
        for key in (
            "speed_range",
            "n_obstacles",
            "obstacle_speed",
            "maneuver_mix",
            "cam_yaws_deg",
        ):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)


@dataclass
class FrameObservation:
    t: int
    images: np.ndarray  # (M, H, W, 3) uint8
    depth: np.ndarray  # (M, h, w) float64, 0 where sky
    semantics: np.ndarray  # (M, h, w) uint8, 255 sky
    command: int
    expert_traj: np.ndarray  # (S, 2) ego frame meters
    ego_pose: np.ndarray  # (x, y, yaw) world


@dataclass
class Episode:
    scene: Scene
    rig: list
    frames: list
    maneuver: int
    seed: list
    dt: float

    @property
    def n_frames(self) -> int:
        return len(self.frames)


def build_rig(cfg: GenConfig) -> list:
    """Feature-resolution cameras: front, front-left, front-right."""
    half_fov = np.deg2rad(cfg.hfov_deg) / 2.0
    fx = (cfg.feature_size / 2.0) / np.tan(half_fov)
    rig = []
    for yaw_deg in cfg.cam_yaws_deg[: cfg.views]:
        yaw = np.deg2rad(yaw_deg)
        rotation = front_camera_rotation(yaw)
        # camera sits ahead of the rear axle, rotated with its view direction
        offset = np.array(
            [cfg.cam_forward * np.cos(yaw), cfg.cam_forward * np.sin(yaw), cfg.cam_height]
        )
        rig.append(
            CameraModel(
                fx=fx,
                fy=fx,
                cx=cfg.feature_size / 2.0,
                cy=cfg.feature_size / 2.0,
                h=cfg.feature_size,
                w=cfg.feature_size,
                rotation=rotation,
                translation=offset,
            )
        )
    return rig


def pose_at_arclength(curvature: float, s) -> np.ndarray:
    """Pose (x, y, yaw) after traveling arclength ``s`` from the origin."""
    s = np.asarray(s, dtype=np.float64)
    if abs(curvature) < 1e-9:
        return np.stack([s, np.zeros_like(s), np.zeros_like(s)], axis=-1)
    ang = curvature * s
    return np.stack(
        [np.sin(ang) / curvature, (1.0 - np.cos(ang)) / curvature, ang], axis=-1
    )


def path_normal(yaw) -> np.ndarray:
    """Unit vector pointing left of the path heading."""
    return np.stack([-np.sin(yaw), np.cos(yaw)], axis=-1)


def _ego_clear_of(obstacle: Obstacle, poses: np.ndarray, dt: float, margin: float) -> bool:
    inflated = (EGO_LENGTH + margin, EGO_WIDTH + margin)
    for i, pose in enumerate(poses):
        if rects_overlap(
            pose[:2],
            inflated,
            pose[2],
            obstacle.center_at(i * dt),
            obstacle.extents,
            obstacle.heading,
        ):
            return False
    return True


_OBSTACLE_SHAPES = {
    CLASS_VEHICLE: ((4.2, 1.9), 1.6),
    CLASS_PEDESTRIAN: ((0.5, 0.5), 1.75),
    CLASS_BARRIER: ((2.5, 0.5), 1.1),
}


def _sample_obstacles(cfg, rng, poses, path_len, curvature):
    count = int(rng.integers(cfg.n_obstacles[0], cfg.n_obstacles[1] + 1))
    obstacles = []
    for _ in range(count):
        for _try in range(25):
            class_id = int(rng.choice([CLASS_VEHICLE, CLASS_PEDESTRIAN, CLASS_BARRIER],
                                      p=[0.5, 0.25, 0.25]))
            base_extents, height = _OBSTACLE_SHAPES[class_id]
            extents = np.array(base_extents) * rng.uniform(0.85, 1.15)
            s_obs = rng.uniform(3.0, max(path_len, 6.0))
            anchor = pose_at_arclength(curvature, s_obs)
            side = rng.choice([-1.0, 1.0])
            lat = side * rng.uniform(
                cfg.road_width / 2.0 + extents[1] / 2.0 + 0.5,
                cfg.road_width / 2.0 + 6.0,
            )
            center = anchor[:2] + lat * path_normal(anchor[2])
            heading = anchor[2] + rng.uniform(-0.4, 0.4)
            velocity = np.zeros(2)
            if rng.random() < cfg.moving_fraction:
                speed = rng.uniform(*cfg.obstacle_speed)
                velocity = speed * np.array([np.cos(heading), np.sin(heading)])
            candidate = Obstacle(center, extents, heading, velocity, class_id, height)
            if _ego_clear_of(candidate, poses, cfg.dt, margin=0.8):
                obstacles.append(candidate)
                break
    return obstacles


def _speed_profile(cfg, rng, base_speed, block_s, n_ticks):
    """Per-tick arclength positions; brakes for an in-lane block if present."""
    s = np.zeros(n_ticks)
    for i in range(1, n_ticks):
        v = base_speed
        if block_s is not None:
            gap = block_s - s[i - 1] - (EGO_LENGTH / 2.0 + 3.0)
            v = min(v, max(0.0, 0.5 * gap))
        s[i] = s[i - 1] + v * cfg.dt
    return s


def generate_episode(cfg: GenConfig, seed, maneuver=None) -> Episode:
    """Deterministically build one episode from the generation config."""
    if cfg.road_width < EGO_WIDTH:
        raise GenerationError(
            f"road width {cfg.road_width} m is narrower than the ego ({EGO_WIDTH} m)"
        )
    if cfg.image_size % cfg.feature_size:
        raise GenerationError("image size must be a multiple of the feature size")
    seed_list = [int(seed)] if np.isscalar(seed) else [int(x) for x in seed]
    rng = np.random.default_rng(seed_list)

    if maneuver is None:
        maneuver = int(rng.choice(3, p=np.asarray(cfg.maneuver_mix) / np.sum(cfg.maneuver_mix)))
    maneuver = int(maneuver)
    speed = rng.uniform(*cfg.speed_range)
    jitter = rng.uniform(-cfg.curvature_jitter, cfg.curvature_jitter)
    if maneuver == int(Command.LEFT):
        curvature = cfg.turn_curvature + jitter
    elif maneuver == int(Command.RIGHT):
        curvature = -(cfg.turn_curvature + jitter)
    else:
        curvature = 0.0

    n_ticks = cfg.n_frames + cfg.s  # extended so every frame has a full horizon
    nominal_len = speed * cfg.dt * n_ticks

    block_s = None
    if cfg.slowdown:
        block_s = rng.uniform(0.6, 0.8) * nominal_len
    arclens = _speed_profile(cfg, rng, speed, block_s, n_ticks)
    poses = pose_at_arclength(curvature, arclens)

    road = Road(curvature=curvature, width=cfg.road_width, length=nominal_len + 10.0)
    obstacles = _sample_obstacles(cfg, rng, poses, nominal_len, curvature)
    if block_s is not None:
        anchor = pose_at_arclength(curvature, block_s)
        lead = Obstacle(
            center=anchor[:2],
            extents=np.array(_OBSTACLE_SHAPES[CLASS_VEHICLE][0]),
            heading=anchor[2],
            velocity=np.zeros(2),
            class_id=CLASS_VEHICLE,
            height=_OBSTACLE_SHAPES[CLASS_VEHICLE][1],
        )
        if _ego_clear_of(lead, poses, cfg.dt, margin=0.2):
            obstacles.append(lead)
    scene = Scene(obstacles=tuple(obstacles), road=road)

    _assert_expert_collision_free(scene, poses, cfg.dt)

    rig = build_rig(cfg)
    image_scale = cfg.image_size // cfg.feature_size
    frames = []
    for t in range(cfg.n_frames):
        images, depth, semantics = render_frame(
            scene, poses[t], rig, image_scale, time_s=t * cfg.dt
        )
        future = poses[t + 1 : t + 1 + cfg.s]
        from .metrics import world_to_ego_2d

        expert = world_to_ego_2d(future[:, :2], poses[t])
        frames.append(
            FrameObservation(
                t=t,
                images=images,
                depth=depth,
                semantics=semantics,
                command=maneuver,
                expert_traj=expert,
                ego_pose=poses[t].copy(),
            )
        )
    return Episode(
        scene=scene, rig=rig, frames=frames, maneuver=maneuver, seed=seed_list, dt=cfg.dt
    )


def _assert_expert_collision_free(scene: Scene, poses: np.ndarray, dt: float) -> None:
    for i, pose in enumerate(poses):
        for obs in scene.obstacles:
            if rects_overlap(
                pose[:2],
                (EGO_LENGTH, EGO_WIDTH),
                pose[2],
                obs.center_at(i * dt),
                obs.extents,
                obs.heading,
            ):
                raise GenerationError(
                    f"expert path collides with an obstacle at tick {i}"
                )
