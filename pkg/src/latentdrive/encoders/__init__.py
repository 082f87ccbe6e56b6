"""Driving world encoding: intention queries and physical world latents."""

from .intention import IntentionEncoder, PlanningQuery
from .physical import (
    IGNORE_LABEL,
    ContextEncoder,
    PriorProvider,
    SemanticHead,
    SemanticLogits,
    SpatialEmbedder,
    TemporalAggregator,
    WorldLatent,
    fuse_spatial,
    semantic_loss,
)
from .vocabulary import (
    Command,
    TrajectoryVocabulary,
    arc_waypoints,
    build_intention_points,
    generate_vocabulary,
    partition_by_command,
)

__all__ = [
    "Command",
    "ContextEncoder",
    "IGNORE_LABEL",
    "IntentionEncoder",
    "PlanningQuery",
    "PriorProvider",
    "SemanticHead",
    "SemanticLogits",
    "SpatialEmbedder",
    "TemporalAggregator",
    "TrajectoryVocabulary",
    "WorldLatent",
    "arc_waypoints",
    "build_intention_points",
    "fuse_spatial",
    "generate_vocabulary",
    "partition_by_command",
    "semantic_loss",
]
