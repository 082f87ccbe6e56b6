"""Operational shell: config, training, evaluation, CLI, and plots."""

from .config import (
    CONFIG_KEYS,
    ConfigError,
    RunConfig,
    config_from_dict,
    config_hash,
    config_to_dict,
    load_run_config,
    parse_config_text,
)
from .evaluation import evaluate, evaluate_episodes, expert_predictor, model_predictor
from .training import (
    TrainingDivergedError,
    TrainState,
    assemble_batch,
    build_intentions,
    build_model,
    load_checkpoint,
    sample_space,
    save_checkpoint,
    train,
)

__all__ = [
    "CONFIG_KEYS",
    "ConfigError",
    "RunConfig",
    "TrainState",
    "TrainingDivergedError",
    "assemble_batch",
    "build_intentions",
    "build_model",
    "config_from_dict",
    "config_hash",
    "config_to_dict",
    "evaluate",
    "evaluate_episodes",
    "expert_predictor",
    "load_checkpoint",
    "load_run_config",
    "model_predictor",
    "parse_config_text",
    "sample_space",
    "save_checkpoint",
    "train",
]
