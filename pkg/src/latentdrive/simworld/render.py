"""Per-pixel ray casting: exact depth, semantics, and shaded class-color images.

Depth is the distance along the optical axis to the first hit. Rays are
parameterized by that z-depth, which is preserved under the rigid transforms
into world and box frames, so slab intersections return z-depths directly.
"""

from __future__ import annotations

import numpy as np

from ..geometry import CameraModel
from .scene import (
    CLASS_BACKGROUND,
    CLASS_COLORS,
    CLASS_ROAD,
    SKY_COLOR,
    SKY_LABEL,
    Scene,
)

FAR_PLANE = 120.0  # hits beyond this count as sky
SHADE_RANGE = 80.0  # depth at which shading bottoms out


def ego_pose_matrix(pose) -> tuple:
    """SE(2) ego pose (x, y, yaw) -> 3D rotation about z and translation."""
    x, y, yaw = pose
    c, s = np.cos(yaw), np.sin(yaw)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return rot, np.array([x, y, 0.0])


def camera_rays(cam: CameraModel, ego_pose):
    """World-frame ray origin and per-pixel direction (dz = 1 in camera z)."""
    r_we, t_we = ego_pose_matrix(ego_pose)
    r_wc = r_we @ cam.rotation
    origin = r_we @ cam.translation + t_we
    u = np.arange(cam.w, dtype=np.float64) + 0.5
    v = np.arange(cam.h, dtype=np.float64) + 0.5
    uu, vv = np.meshgrid(u, v)
    dirs_cam = np.stack(
        [(uu - cam.cx) / cam.fx, (vv - cam.cy) / cam.fy, np.ones_like(uu)], axis=-1
    )
    return origin, dirs_cam @ r_wc.T  # (h, w, 3)


def _slab_interval(o, d, lo, hi):
    """Entry/exit parameters of rays against one slab, vectorized."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t0 = (lo - o) / d
        t1 = (hi - o) / d
    near = np.minimum(t0, t1)
    far = np.maximum(t0, t1)
    # parallel rays: inside the slab -> full interval, outside -> empty
    parallel = np.abs(d) < 1e-12
    inside = (o >= lo) & (o <= hi)
    near = np.where(parallel, np.where(inside, -np.inf, np.inf), near)
    far = np.where(parallel, np.where(inside, np.inf, -np.inf), far)
    return near, far


def raycast(scene: Scene, origin, dirs, obstacles=None):
    """Cast rays and return (depth, semantics); depth 0 marks sky.

    obstacles defaults to the scene's t=0 state; pass ``scene.obstacles_at``
    output for moving scenes.
    """
    h, w = dirs.shape[:2]
    depth = np.full((h, w), np.inf)
    sem = np.full((h, w), SKY_LABEL, dtype=np.uint8)
    obstacles = scene.obstacles if obstacles is None else obstacles

    # ground plane z = 0
    dz = dirs[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        d_ground = -origin[2] / dz
    valid = (dz < -1e-12) & (d_ground > 1e-6)
    ground_pts = origin[None, None, :2] + d_ground[..., None] * dirs[..., :2]
    on_road = scene.road.contains(ground_pts)
    ground_class = np.where(on_road, CLASS_ROAD, CLASS_BACKGROUND).astype(np.uint8)
    hit = valid & (d_ground < depth)
    depth = np.where(hit, d_ground, depth)
    sem = np.where(hit, ground_class, sem)

    for obs in obstacles:
        c, s = np.cos(obs.heading), np.sin(obs.heading)
        rot_t = np.array([[c, s], [-s, c]])  # world -> box frame
        o_xy = rot_t @ (origin[:2] - obs.center)
        d_xy = dirs[..., :2] @ rot_t.T
        near = np.full((h, w), -np.inf)
        far = np.full((h, w), np.inf)
        for axis, half in ((0, obs.extents[0] / 2), (1, obs.extents[1] / 2)):
            n, f = _slab_interval(o_xy[axis], d_xy[..., axis], -half, half)
            near, far = np.maximum(near, n), np.minimum(far, f)
        n, f = _slab_interval(origin[2], dirs[..., 2], 0.0, obs.height)
        near, far = np.maximum(near, n), np.minimum(far, f)
        hit = (near <= far) & (near > 1e-6) & (near < depth)
        depth = np.where(hit, near, depth)
        sem = np.where(hit, np.uint8(obs.class_id), sem)

    sky = ~np.isfinite(depth) | (depth > FAR_PLANE)
    depth = np.where(sky, 0.0, depth)
    sem = np.where(sky, SKY_LABEL, sem).astype(np.uint8)
    return depth, sem


def shade(depth: np.ndarray, sem: np.ndarray) -> np.ndarray:
    """Flat class colors with depth-based intensity; uint8 (h, w, 3)."""
    intensity = np.clip(1.0 - depth / SHADE_RANGE, 0.25, 1.0)
    img = np.empty(depth.shape + (3,), dtype=np.float64)
    sky = sem == SKY_LABEL
    safe = np.where(sky, 0, sem).astype(np.int64)
    img[:] = CLASS_COLORS[safe] * intensity[..., None]
    img[sky] = SKY_COLOR
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def render_frame(scene: Scene, ego_pose, rig, image_scale: int, time_s: float = 0.0):
    """Render all views: (images u8 (M,H,W,3), depth (M,h,w), semantics (M,h,w)).

    ``rig`` carries feature-resolution cameras; images render at
    image_scale times that resolution.
    """
    obstacles = scene.obstacles_at(time_s)
    m = len(rig)
    h, w = rig[0].h, rig[0].w
    hi, wi = h * image_scale, w * image_scale
    depth = np.empty((m, h, w))
    sem = np.empty((m, h, w), dtype=np.uint8)
    images = np.empty((m, hi, wi, 3), dtype=np.uint8)
    for i, cam in enumerate(rig):
        origin, dirs = camera_rays(cam, ego_pose)
        depth[i], sem[i] = raycast(scene, origin, dirs, obstacles)
        cam_img = cam.scaled(image_scale)
        origin_i, dirs_i = camera_rays(cam_img, ego_pose)
        d_img, s_img = raycast(scene, origin_i, dirs_i, obstacles)
        images[i] = shade(d_img, s_img)
    return images, depth, sem


def hit_points_world(cam: CameraModel, ego_pose, depth: np.ndarray) -> np.ndarray:
    """World-frame hit points for one view's depth map (oracle for tests)."""
    origin, dirs = camera_rays(cam, ego_pose)
    return origin + depth[..., None] * dirs
