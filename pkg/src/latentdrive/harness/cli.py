"""Command line: gen-data, train, eval, plan, plot.

Exit codes: 0 on success, 1 on a named operational error (one-line
diagnostic on stderr), 2 on usage errors (argparse). Log verbosity comes
from the LATENTDRIVE_LOG environment variable (debug/info/warning/error).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from ..diffcore import CheckpointError
from ..simworld import CorpusError, GenConfig, GenerationError, read_corpus, read_index
from ..worldmodel import PlanResult, infer_plan
from .config import ConfigError, RunConfig, load_run_config
from .evaluation import evaluate
from .training import TrainingDivergedError, load_checkpoint, train

log = logging.getLogger("latentdrive")

_KNOWN_ERRORS = (
    ConfigError,
    CorpusError,
    CheckpointError,
    GenerationError,
    TrainingDivergedError,
    FileNotFoundError,
    ValueError,
)


def _setup_logging():
    level = os.environ.get("LATENTDRIVE_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latentdrive",
        description="Desk-scale intention-aware latent world model driving planner",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", help="generate a synthetic episode corpus")
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--episodes", type=int, required=True)
    gen.add_argument("--out", type=Path, required=True)
    gen.add_argument("--frames", type=int, default=40)
    gen.add_argument("--image-size", type=int, default=64)
    gen.add_argument("--views", type=int, default=3)
    gen.add_argument("--obstacles", type=int, nargs=2, default=(2, 6), metavar=("MIN", "MAX"))
    gen.add_argument("--speed", type=float, nargs=2, default=(3.0, 5.0), metavar=("MIN", "MAX"))
    gen.add_argument("--maneuver-mix", type=float, nargs=3, default=(1, 1, 1),
                     metavar=("LEFT", "STRAIGHT", "RIGHT"))
    gen.add_argument("--moving-fraction", type=float, default=0.3)
    gen.add_argument("--slowdown", action="store_true")

    tr = sub.add_parser("train", help="train a planner on a corpus")
    tr.add_argument("--config", type=Path, default=None, help="run config file (defaults apply when omitted)")
    tr.add_argument("--corpus", type=Path, default=None)
    tr.add_argument("--out", type=Path, required=True)
    tr.add_argument("--steps", type=int, default=None, help="override optim.steps")
    tr.add_argument("--resume", type=Path, default=None, help="checkpoint to resume from")

    ev = sub.add_parser("eval", help="evaluate a checkpoint on a corpus")
    ev.add_argument("--config", type=Path, default=None,
                    help="run config; defaults to the one stored in the checkpoint")
    ev.add_argument("--checkpoint", type=Path, required=True)
    ev.add_argument("--corpus", type=Path, required=True)
    ev.add_argument("--out", type=Path, required=True)
    ev.add_argument("--workers", type=int, default=1)

    pl = sub.add_parser("plan", help="plan one frame and emit the PlanResult record")
    pl.add_argument("--checkpoint", type=Path, required=True)
    pl.add_argument("--corpus", type=Path, required=True)
    pl.add_argument("--episode", type=str, required=True, help="episode dir name, e.g. ep_0003")
    pl.add_argument("--frame", type=int, required=True)
    pl.add_argument("--out", type=Path, required=True)

    po = sub.add_parser("plot", help="render a PlanResult or metrics log as SVG")
    src = po.add_mutually_exclusive_group(required=True)
    src.add_argument("--plan", type=Path, help="PlanResult JSON from the plan command")
    src.add_argument("--metrics", type=Path, help="metrics JSONL from training")
    po.add_argument("--corpus", type=Path, help="corpus dir (required with --plan)")
    po.add_argument("--episode", type=str, help="episode dir name (required with --plan)")
    po.add_argument("--out", type=Path, required=True)
    return parser


def _config_from_checkpoint(path) -> RunConfig:
    from ..diffcore import load_archive
    from .config import config_from_dict

    _, meta = load_archive(path)
    return config_from_dict(meta["config"])


def _load_episode_by_name(corpus: Path, name: str):
    from ..simworld import read_episode

    index = read_index(corpus)
    names = [e["dir"] for e in index["episodes"]]
    if name not in names:
        raise CorpusError(f"episode '{name}' not in corpus (has {names[:8]}...)")
    return read_episode(corpus / name / "episode.bin")


def _cmd_gen_data(args) -> int:
    from ..simworld import generate_corpus

    cfg = GenConfig(
        n_frames=args.frames,
        views=args.views,
        image_size=args.image_size,
        feature_size=args.image_size // 8,
        n_obstacles=tuple(args.obstacles),
        speed_range=tuple(args.speed),
        maneuver_mix=tuple(args.maneuver_mix),
        moving_fraction=args.moving_fraction,
        slowdown=args.slowdown,
    )
    out = generate_corpus(cfg, seed=args.seed, episodes=args.episodes, out_dir=args.out)
    print(f"wrote {args.episodes} episodes to {out}")
    return 0


def _cmd_train(args) -> int:
    cfg = load_run_config(args.config) if args.config else RunConfig()
    if args.steps is not None:
        from dataclasses import replace

        cfg = replace(cfg, steps=args.steps)
    corpus = args.corpus or (Path(cfg.corpus) if cfg.corpus else None)
    if corpus is None:
        raise ConfigError("no corpus given (flag --corpus or config data.corpus)")
    state = train(cfg, corpus, args.out, resume_from=args.resume)
    print(f"trained {state.step} steps; checkpoint at {Path(args.out) / 'checkpoint.bin'}")
    return 0


def _cmd_eval(args) -> int:
    cfg = load_run_config(args.config) if args.config else _config_from_checkpoint(args.checkpoint)
    report = evaluate(cfg, args.checkpoint, args.corpus, out_path=args.out,
                      workers=args.workers)
    print(json.dumps(report.to_dict(), sort_keys=True))
    return 0


def _cmd_plan(args) -> int:
    cfg = _config_from_checkpoint(args.checkpoint)
    episode = _load_episode_by_name(args.corpus, args.episode)
    if not 0 <= args.frame < episode.n_frames:
        raise ValueError(f"frame {args.frame} out of range [0, {episode.n_frames})")
    model, _, _ = load_checkpoint(args.checkpoint, cfg, episode.rig)
    result = infer_plan(episode.frames[: args.frame + 1], model)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w") as f:
        json.dump(result.to_dict(), f, indent=2)
    print(f"plan for frame {args.frame}: modality {result.selected_index}")
    return 0


def _cmd_plot(args) -> int:
    from .plots import plot_metrics, plot_plan

    if args.plan is not None:
        if args.corpus is None or args.episode is None:
            raise ConfigError("--plan requires --corpus and --episode")
        with open(args.plan) as f:
            plan = PlanResult.from_dict(json.load(f))
        episode = _load_episode_by_name(args.corpus, args.episode)
        out = plot_plan(episode, plan, args.out)
    else:
        out = plot_metrics(args.metrics, args.out)
    print(f"wrote {out}")
    return 0


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "plan": _cmd_plan,
    "plot": _cmd_plot,
}


def main(argv=None) -> int:
    _setup_logging()
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except _KNOWN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
