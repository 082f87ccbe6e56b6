"""Pinhole camera geometry and per-pixel back-projection.

Frame conventions (asserted in tests):
  ego frame    x forward, y left, z up, origin at the rear-axle center
  camera frame z forward (optical axis), x right, y down

Depth throughout is the distance along the optical axis (camera z), not the
Euclidean ray length.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

# z-depth assigned to pixels with no valid depth (sky), keeping positional
# embeddings finite and far from near content
SKY_DEPTH = 200.0

_ORTHO_TOL = 1e-9


@dataclass(frozen=True)
class CameraModel:
    """Intrinsics at feature-map resolution plus the camera-to-ego transform."""

    fx: float
    fy: float
    cx: float
    cy: float
    h: int
    w: int
    rotation: np.ndarray  # (3, 3) camera axes expressed in ego coordinates
    translation: np.ndarray  # (3,) camera center in ego frame, meters

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError(f"focal lengths must be positive, got {self.fx}, {self.fy}")
        r = np.asarray(self.rotation, dtype=np.float64)
        if r.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {r.shape}")
        if not np.allclose(r @ r.T, np.eye(3), atol=_ORTHO_TOL):
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > _ORTHO_TOL:
            raise ValueError("rotation determinant is not +1")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(
            self, "translation", np.asarray(self.translation, dtype=np.float64).reshape(3)
        )

    def scaled(self, factor: float) -> "CameraModel":
        """Same camera at ``factor`` times the pixel resolution."""
        return replace(
            self,
            fx=self.fx * factor,
            fy=self.fy * factor,
            cx=self.cx * factor,
            cy=self.cy * factor,
            h=int(round(self.h * factor)),
            w=int(round(self.w * factor)),
        )


def front_camera_rotation(yaw: float = 0.0) -> np.ndarray:
    """Rotation of a forward-looking camera yawed by ``yaw`` radians (left +)."""
    base = np.array(
        [
            [0.0, 0.0, 1.0],  # cam x (right) -> ego -y, cam z (fwd) -> ego x
            [-1.0, 0.0, 0.0],
            [0.0, -1.0, 0.0],
        ]
    )
    c, s = np.cos(yaw), np.sin(yaw)
    rz = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return rz @ base


def pixel_to_ego(u, v, depth, cam: CameraModel) -> np.ndarray:
    """Back-project pixel(s) at z-depth ``depth`` into the ego frame.

    Accepts scalars or broadcastable arrays; returns (..., 3) meters.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    if np.any(depth <= 0):
        raise ValueError("depth must be positive for back-projection")
    x = (u - cam.cx) * depth / cam.fx
    y = (v - cam.cy) * depth / cam.fy
    pts_cam = np.stack(np.broadcast_arrays(x, y, depth), axis=-1)
    return pts_cam @ cam.rotation.T + cam.translation


def ego_to_pixel(points, cam: CameraModel):
    """Forward pinhole projection; returns (u, v, depth) arrays.

    Points behind the image plane (camera z <= 0) raise.
    """
    pts = np.asarray(points, dtype=np.float64)
    pts_cam = (pts - cam.translation) @ cam.rotation
    z = pts_cam[..., 2]
    if np.any(z <= 0):
        raise ValueError("point behind the camera")
    u = cam.fx * pts_cam[..., 0] / z + cam.cx
    v = cam.fy * pts_cam[..., 1] / z + cam.cy
    return u, v, z


def pixel_grid(cam: CameraModel):
    """Pixel-center (u, v) coordinate arrays for the camera's feature grid."""
    u = np.arange(cam.w, dtype=np.float64) + 0.5
    v = np.arange(cam.h, dtype=np.float64) + 0.5
    return np.meshgrid(u, v)  # each (h, w)


def position_maps(depth: np.ndarray, rig) -> np.ndarray:
    """Ego-frame 3D position per feature pixel: (M, h, w) depth -> (M, h, w, 3).

    Non-positive or non-finite depths (sky) are filled at ``SKY_DEPTH`` along
    the pixel ray.
    """
    depth = np.asarray(depth, dtype=np.float64)
    if depth.ndim != 3:
        raise ValueError(f"depth must be (views, h, w), got {depth.shape}")
    if depth.shape[0] != len(rig):
        raise ValueError(
            f"{depth.shape[0]} depth views but rig has {len(rig)} cameras"
        )
    out = np.empty(depth.shape + (3,), dtype=np.float64)
    for m, cam in enumerate(rig):
        if depth.shape[1:] != (cam.h, cam.w):
            raise ValueError(
                f"view {m}: depth {depth.shape[1:]} does not match camera grid {(cam.h, cam.w)}"
            )
        uu, vv = pixel_grid(cam)
        d = depth[m]
        d = np.where(np.isfinite(d) & (d > 0), d, SKY_DEPTH)
        out[m] = pixel_to_ego(uu, vv, d, cam)
    return out
