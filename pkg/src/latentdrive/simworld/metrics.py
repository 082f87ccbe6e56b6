"""Open-loop planning metrics: displacement error and collision rate.

L2@tau is the Euclidean error at the waypoint tau seconds out, averaged over
samples. CR@tau places a 4.0 x 1.85 m ego rectangle at the predicted waypoint
(heading from consecutive waypoints) and reports the percentage of samples
overlapping any obstacle rectangle at the matching future time. Rectangle
overlap uses the separating-axis test.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EGO_LENGTH = 4.0
EGO_WIDTH = 1.85
HORIZONS_S = (1.0, 2.0, 3.0)


def rect_corners(center, extents, heading) -> np.ndarray:
    """Corners of an oriented rectangle, (4, 2), counterclockwise."""
    cx, cy = center
    hl, hw = extents[0] / 2.0, extents[1] / 2.0
    c, s = np.cos(heading), np.sin(heading)
    local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
    rot = np.array([[c, -s], [s, c]])
    return local @ rot.T + np.array([cx, cy])


def rects_overlap(center_a, extents_a, heading_a, center_b, extents_b, heading_b) -> bool:
    """Separating-axis overlap test for two oriented rectangles.

    Touching boundaries count as overlap.
    """
    ca = rect_corners(center_a, extents_a, heading_a)
    cb = rect_corners(center_b, extents_b, heading_b)
    for heading in (heading_a, heading_a + np.pi / 2, heading_b, heading_b + np.pi / 2):
        axis = np.array([np.cos(heading), np.sin(heading)])
        pa = ca @ axis
        pb = cb @ axis
        if pa.max() < pb.min() or pb.max() < pa.min():
            return False
    return True


def trajectory_headings(waypoints: np.ndarray) -> np.ndarray:
    """Per-waypoint heading from forward differences.

    The last waypoint reuses the previous segment's heading (there is no
    forward difference); degenerate segments fall back to the prior heading.
    """
    wps = np.asarray(waypoints, dtype=np.float64)
    n = len(wps)
    headings = np.zeros(n)
    prev = 0.0
    for i in range(n):
        if i < n - 1:
            seg = wps[i + 1] - wps[i]
        else:
            seg = wps[i] - wps[i - 1] if n > 1 else np.zeros(2)
        if np.hypot(*seg) > 1e-9:
            prev = np.arctan2(seg[1], seg[0])
        headings[i] = prev
    return headings


def world_to_ego_2d(points, pose) -> np.ndarray:
    """World (x, y) points into the ego frame of SE(2) pose (x, y, yaw)."""
    x, y, yaw = pose
    c, s = np.cos(yaw), np.sin(yaw)
    rot_t = np.array([[c, s], [-s, c]])
    return (np.asarray(points, dtype=np.float64) - np.array([x, y])) @ rot_t.T


@dataclass
class MetricsReport:
    l2_1s: float
    l2_2s: float
    l2_3s: float
    l2_avg: float
    cr_1s: float
    cr_2s: float
    cr_3s: float
    cr_avg: float
    n_samples: int
    n_skipped: int

    def to_dict(self) -> dict:
        return {
            "l2_1s": self.l2_1s,
            "l2_2s": self.l2_2s,
            "l2_3s": self.l2_3s,
            "l2_avg": self.l2_avg,
            "cr_1s": self.cr_1s,
            "cr_2s": self.cr_2s,
            "cr_3s": self.cr_3s,
            "cr_avg": self.cr_avg,
            "n_samples": self.n_samples,
            "n_skipped": self.n_skipped,
        }

    @classmethod
    def from_records(cls, records, n_skipped: int = 0) -> "MetricsReport":
        """Aggregate per-sample records {l2_τ, col_τ} into the report."""
        if not records:
            return cls(*([0.0] * 8), n_samples=0, n_skipped=n_skipped)
        l2 = {}
        cr = {}
        for tau in HORIZONS_S:
            key = f"{tau:.0f}s"
            l2[key] = float(np.mean([r[f"l2_{key}"] for r in records]))
            cr[key] = 100.0 * float(np.mean([r[f"col_{key}"] for r in records]))
        return cls(
            l2_1s=l2["1s"],
            l2_2s=l2["2s"],
            l2_3s=l2["3s"],
            l2_avg=float(np.mean(list(l2.values()))),
            cr_1s=cr["1s"],
            cr_2s=cr["2s"],
            cr_3s=cr["3s"],
            cr_avg=float(np.mean(list(cr.values()))),
            n_samples=len(records),
            n_skipped=n_skipped,
        )


def sample_record(episode, t: int, prediction: np.ndarray) -> dict:
    """Per-horizon errors and collision flags for one frame's prediction."""
    frame = episode.frames[t]
    expert = frame.expert_traj
    prediction = np.asarray(prediction, dtype=np.float64)
    if prediction.shape != expert.shape:
        raise ValueError(
            f"prediction {prediction.shape} does not match expert {expert.shape}"
        )
    headings = trajectory_headings(prediction)
    record = {"t": t}
    for tau in HORIZONS_S:
        ticks = int(round(tau / episode.dt))
        idx = ticks - 1
        record[f"l2_{tau:.0f}s"] = float(
            np.linalg.norm(prediction[idx] - expert[idx])
        )
        future_s = (t + ticks) * episode.dt
        collided = False
        for obs in episode.scene.obstacles:
            center_e = world_to_ego_2d(obs.center_at(future_s), frame.ego_pose)
            heading_e = obs.heading - frame.ego_pose[2]
            if rects_overlap(
                prediction[idx],
                (EGO_LENGTH, EGO_WIDTH),
                headings[idx],
                center_e,
                obs.extents,
                heading_e,
            ):
                collided = True
                break
        record[f"col_{tau:.0f}s"] = collided
    return record


def evaluate_plan(episode, predictions: dict):
    """Score per-frame predictions against one episode.

    ``predictions`` maps frame index -> (S, 2) ego-frame trajectory. Frames
    whose 3 s horizon runs past the episode are skipped and counted. Returns
    (MetricsReport, per-sample records).
    """
    max_ticks = int(round(max(HORIZONS_S) / episode.dt))
    last = len(episode.frames) - 1
    records = []
    skipped = 0
    for t in sorted(predictions):
        if t + max_ticks > last:
            skipped += 1
            continue
        records.append(sample_record(episode, t, predictions[t]))
    return MetricsReport.from_records(records, n_skipped=skipped), records
