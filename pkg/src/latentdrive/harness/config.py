"""Run configuration: flat dotted-key text format with hard unknown-key errors.

Format, one assignment per line::

    # comment
    model.d = 64
    optim.lr = 5e-5
    run.precision = "float32"

Values parse as int, float, bool (true/false), or string (quotes optional).
Any key outside the schema is an error: a typo in a loss weight must never
pass silently.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from ..worldmodel import LossWeights, ModelConfig


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    # model dims
    views: int = 3
    image_size: int = 64
    d: int = 256
    heads: int = 4
    k: int = 6
    s: int = 6
    classes: int = 5
    horizon_n: int = 3
    dreamer_layers: int = 2
    # trajectory vocabulary
    n_vocab: int = 8192
    vocab_speed_min: float = 0.5
    vocab_speed_max: float = 6.0
    vocab_max_curvature: float = 0.15
    lateral_threshold: float = 2.0
    # loss weights
    alpha: float = 0.2
    beta: float = 0.2
    gamma: float = 0.5
    eta: float = 1.0
    focal_gamma: float = 2.0
    # optimizer
    optimizer: str = "adam"
    lr: float = 5e-5
    steps: int = 2000
    batch_size: int = 4
    # run
    seed: int = 0
    precision: str = "float64"
    log_every: int = 10
    checkpoint_every: int = 500
    # data paths (CLI flags take precedence when given)
    corpus: str = ""
    out_dir: str = ""

    def __post_init__(self):
        if self.precision not in ("float64", "float32"):
            raise ConfigError(f"precision must be float64 or float32, got '{self.precision}'")
        if self.optimizer.lower() not in ("adam", "sgd"):
            raise ConfigError(f"optimizer must be adam or sgd, got '{self.optimizer}'")

    @property
    def dtype(self):
        return np.float32 if self.precision == "float32" else np.float64

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            views=self.views,
            image_size=self.image_size,
            d=self.d,
            heads=self.heads,
            k=self.k,
            s=self.s,
            classes=self.classes,
            horizon=self.horizon_n,
            dreamer_layers=self.dreamer_layers,
        )

    def loss_weights(self) -> LossWeights:
        return LossWeights(
            alpha=self.alpha,
            beta=self.beta,
            gamma=self.gamma,
            eta=self.eta,
            focal_gamma=self.focal_gamma,
        )


# dotted config key -> dataclass field
CONFIG_KEYS = {
    "model.views": "views",
    "model.image_size": "image_size",
    "model.d": "d",
    "model.heads": "heads",
    "model.k": "k",
    "model.s": "s",
    "model.classes": "classes",
    "model.horizon_n": "horizon_n",
    "model.dreamer_layers": "dreamer_layers",
    "vocab.n": "n_vocab",
    "vocab.speed_min": "vocab_speed_min",
    "vocab.speed_max": "vocab_speed_max",
    "vocab.max_curvature": "vocab_max_curvature",
    "vocab.lateral_threshold": "lateral_threshold",
    "loss.alpha": "alpha",
    "loss.beta": "beta",
    "loss.gamma": "gamma",
    "loss.eta": "eta",
    "loss.focal_gamma": "focal_gamma",
    "optim.name": "optimizer",
    "optim.lr": "lr",
    "optim.steps": "steps",
    "optim.batch_size": "batch_size",
    "run.seed": "seed",
    "run.precision": "precision",
    "run.log_every": "log_every",
    "run.checkpoint_every": "checkpoint_every",
    "data.corpus": "corpus",
    "data.out_dir": "out_dir",
}

_FIELD_TO_KEY = {v: k for k, v in CONFIG_KEYS.items()}

# model-identity keys folded into the checkpoint compatibility hash
_HASH_FIELDS = (
    "views",
    "image_size",
    "d",
    "heads",
    "k",
    "s",
    "classes",
    "horizon_n",
    "dreamer_layers",
    "n_vocab",
    "vocab_speed_min",
    "vocab_speed_max",
    "vocab_max_curvature",
    "lateral_threshold",
    "precision",
)


def _parse_value(raw: str):
    raw = raw.strip()
    if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "'\"":
        return raw[1:-1]
    low = raw.lower()
    if low == "true":
        return True
    if low == "false":
        return False
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw


def parse_config_text(text: str) -> dict:
    """Text -> {dotted key: value}; rejects malformed lines and unknown keys."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got '{stripped}'")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown config key '{key}'")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key '{key}'")
        values[key] = _parse_value(raw)
    return values


def run_config_from_values(values: dict) -> RunConfig:
    kwargs = {}
    defaults = RunConfig()
    for key, value in values.items():
        attr = CONFIG_KEYS[key]
        want = type(getattr(defaults, attr))
        if want is float and isinstance(value, int):
            value = float(value)
        if not isinstance(value, want):
            raise ConfigError(
                f"key '{key}' expects {want.__name__}, got {type(value).__name__} ({value!r})"
            )
        kwargs[attr] = value
    return RunConfig(**kwargs)


def load_run_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return run_config_from_values(parse_config_text(path.read_text()))


def config_to_dict(cfg: RunConfig) -> dict:
    """Flat dotted-key dict (JSON-friendly) for checkpoints and logs."""
    return {_FIELD_TO_KEY[f.name]: getattr(cfg, f.name) for f in fields(RunConfig)}


def config_from_dict(d: dict) -> RunConfig:
    unknown = set(d) - set(CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return run_config_from_values(dict(d))


def config_hash(cfg: RunConfig) -> str:
    payload = {name: getattr(cfg, name) for name in _HASH_FIELDS}
    blob = json.dumps(payload, sort_keys=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]
