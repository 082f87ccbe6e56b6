"""Synthetic multi-view driving world: episodes, rendering, storage, metrics."""

from .episode import (
    Episode,
    FrameObservation,
    GenConfig,
    GenerationError,
    build_rig,
    generate_episode,
    pose_at_arclength,
)
from .metrics import (
    EGO_LENGTH,
    EGO_WIDTH,
    HORIZONS_S,
    MetricsReport,
    evaluate_plan,
    rect_corners,
    rects_overlap,
    sample_record,
    trajectory_headings,
    world_to_ego_2d,
)
from .render import camera_rays, hit_points_world, raycast, render_frame
from .scene import (
    CLASS_BACKGROUND,
    CLASS_BARRIER,
    CLASS_PEDESTRIAN,
    CLASS_ROAD,
    CLASS_VEHICLE,
    NUM_CLASSES,
    SKY_LABEL,
    Obstacle,
    Road,
    Scene,
)
from .storage import (
    CorpusError,
    CorpusFormatError,
    generate_corpus,
    maneuver_schedule,
    read_corpus,
    read_episode,
    read_index,
    write_episode,
)


class ExactPriors:
    """Prior provider backed by the simulator's exact ground truth."""

    def depth_of(self, frame: FrameObservation):
        return frame.depth

    def semantics_of(self, frame: FrameObservation):
        return frame.semantics


__all__ = [
    "CLASS_BACKGROUND",
    "CLASS_BARRIER",
    "CLASS_PEDESTRIAN",
    "CLASS_ROAD",
    "CLASS_VEHICLE",
    "CorpusError",
    "CorpusFormatError",
    "EGO_LENGTH",
    "EGO_WIDTH",
    "Episode",
    "ExactPriors",
    "FrameObservation",
    "GenConfig",
    "GenerationError",
    "HORIZONS_S",
    "MetricsReport",
    "NUM_CLASSES",
    "Obstacle",
    "Road",
    "SKY_LABEL",
    "Scene",
    "build_rig",
    "camera_rays",
    "evaluate_plan",
    "generate_corpus",
    "generate_episode",
    "hit_points_world",
    "maneuver_schedule",
    "pose_at_arclength",
    "raycast",
    "read_corpus",
    "read_episode",
    "read_index",
    "rect_corners",
    "rects_overlap",
    "render_frame",
    "sample_record",
    "trajectory_headings",
    "world_to_ego_2d",
    "write_episode",
]
