"""Multi-modal trajectory generation, future dreaming, and selection."""

from .heads import ActionEncoder, FutureDreamer, ScoreNet, TrajectoryDecoder
from .model import (
    DrivingPlanner,
    ModelConfig,
    PlanBundle,
    PlanResult,
    TrainBatch,
    infer_plan,
    plan_bundle_from_outputs,
    plan_frames,
    prepare_images,
    training_forward,
)
from .selector import (
    LossWeights,
    composite_loss,
    latent_distances,
    reconstruction_loss,
    score_loss,
    select_modality,
    selected_indices,
)

__all__ = [
    "ActionEncoder",
    "DrivingPlanner",
    "FutureDreamer",
    "LossWeights",
    "ModelConfig",
    "PlanBundle",
    "PlanResult",
    "ScoreNet",
    "TrainBatch",
    "TrajectoryDecoder",
    "composite_loss",
    "infer_plan",
    "latent_distances",
    "plan_bundle_from_outputs",
    "plan_frames",
    "prepare_images",
    "reconstruction_loss",
    "score_loss",
    "select_modality",
    "selected_indices",
    "training_forward",
]
