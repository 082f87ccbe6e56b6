"""Scene description: a road corridor plus oriented box obstacles.

World frame equals the ego frame at t=0 (x forward, y left, z up). The road
centerline is the scripted ego path: a straight line or a constant-curvature
arc starting at the origin heading +x.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# semantic class ids (uint8); 255 is the sky/ignore label
CLASS_ROAD = 0
CLASS_VEHICLE = 1
CLASS_PEDESTRIAN = 2
CLASS_BARRIER = 3
CLASS_BACKGROUND = 4
NUM_CLASSES = 5
SKY_LABEL = 255

CLASS_COLORS = np.array(
    [
        [90, 90, 95],  # road asphalt
        [200, 60, 50],  # vehicle
        [240, 200, 60],  # pedestrian
        [150, 110, 200],  # barrier
        [70, 140, 70],  # background terrain
    ],
    dtype=np.float64,
)
SKY_COLOR = np.array([170, 200, 235], dtype=np.float64)


@dataclass(frozen=True)
class Obstacle:
    """Oriented box: footprint rectangle extruded from the ground plane."""

    center: np.ndarray  # (2,) world meters at t=0
    extents: np.ndarray  # (length along heading, width)
    heading: float  # radians
    velocity: np.ndarray  # (2,) world m/s, constant
    class_id: int
    height: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64))
        object.__setattr__(self, "extents", np.asarray(self.extents, dtype=np.float64))
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=np.float64))
        if np.any(self.extents <= 0):
            raise ValueError(f"obstacle extents must be positive, got {self.extents}")

    def center_at(self, time_s: float) -> np.ndarray:
        return self.center + self.velocity * time_s

    def to_dict(self) -> dict:
        return {
            "center": self.center.tolist(),
            "extents": self.extents.tolist(),
            "heading": float(self.heading),
            "velocity": self.velocity.tolist(),
            "class_id": int(self.class_id),
            "height": float(self.height),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Obstacle":
        return cls(
            center=np.array(d["center"]),
            extents=np.array(d["extents"]),
            heading=d["heading"],
            velocity=np.array(d["velocity"]),
            class_id=d["class_id"],
            height=d["height"],
        )


@dataclass(frozen=True)
class Road:
    """Corridor of ``width`` around the ego centerline.

    curvature 0 is a straight corridor along +x of ``length`` meters; nonzero
    curvature is a circular corridor (annulus) of radius 1/|curvature|.
    """

    curvature: float
    width: float
    length: float

    def lateral_offset(self, points: np.ndarray) -> np.ndarray:
        """Signed lateral distance from the centerline (+ = left of path)."""
        points = np.asarray(points, dtype=np.float64)
        if abs(self.curvature) < 1e-9:
            return points[..., 1]
        center = np.array([0.0, 1.0 / self.curvature])
        radius = 1.0 / abs(self.curvature)
        dist = np.linalg.norm(points - center, axis=-1)
        return np.sign(self.curvature) * (radius - dist)

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        lateral_ok = np.abs(self.lateral_offset(points)) <= self.width / 2.0
        if abs(self.curvature) < 1e-9:
            x = points[..., 0]
            return lateral_ok & (x >= -5.0) & (x <= self.length + 10.0)
        return lateral_ok

    def to_dict(self) -> dict:
        return {"curvature": self.curvature, "width": self.width, "length": self.length}

    @classmethod
    def from_dict(cls, d: dict) -> "Road":
        return cls(**d)


@dataclass(frozen=True)
class Scene:
    obstacles: tuple
    road: Road
    bounds: float = 250.0  # half-extent of the world box, meters

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(self.obstacles))

    def obstacles_at(self, time_s: float):
        """Obstacle list with centers advanced to ``time_s`` seconds."""
        return [
            Obstacle(
                center=o.center_at(time_s),
                extents=o.extents,
                heading=o.heading,
                velocity=o.velocity,
                class_id=o.class_id,
                height=o.height,
            )
            for o in self.obstacles
        ]

    def to_dict(self) -> dict:
        return {
            "obstacles": [o.to_dict() for o in self.obstacles],
            "road": self.road.to_dict(),
            "bounds": self.bounds,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scene":
        return cls(
            obstacles=tuple(Obstacle.from_dict(o) for o in d["obstacles"]),
            road=Road.from_dict(d["road"]),
            bounds=d["bounds"],
        )
