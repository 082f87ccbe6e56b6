"""Camera geometry, positional encodings, and clustering."""

from .camera import (
    SKY_DEPTH,
    CameraModel,
    ego_to_pixel,
    front_camera_rotation,
    pixel_grid,
    pixel_to_ego,
    position_maps,
)
from .clustering import IntentionPointSet, kmeans, kmeans_sse
from .encoding import pe_width, sinusoidal_pe

__all__ = [
    "CameraModel",
    "IntentionPointSet",
    "SKY_DEPTH",
    "ego_to_pixel",
    "front_camera_rotation",
    "kmeans",
    "kmeans_sse",
    "pe_width",
    "pixel_grid",
    "pixel_to_ego",
    "position_maps",
    "sinusoidal_pe",
]
