"""Open-loop evaluation: run per-frame inference and score against episodes.

Inference only ever sees past-and-present frames; episodes evaluate
independently, optionally on worker threads, and the report re-aggregates
from per-sample records.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from ..simworld import MetricsReport, evaluate_plan, read_corpus
from ..worldmodel import plan_frames
from .config import RunConfig
from .training import load_checkpoint


def model_predictor(model):
    """Wrap a planner into a per-episode prediction function."""

    def predict(episode):
        results = plan_frames(model, episode.frames)
        return {r.frame_id: r.trajectory for r in results}

    return predict


def expert_predictor(episode):
    """Oracle that replays the expert trajectory (perfect-score baseline)."""
    return {f.t: f.expert_traj.copy() for f in episode.frames}


def evaluate_episodes(predict, episodes, workers: int = 1):
    """Score a predictor over episodes; returns (report, per-sample records)."""

    def one(episode):
        return evaluate_plan(episode, predict(episode))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, episodes))
    else:
        results = [one(ep) for ep in episodes]
    records = [r for _, recs in results for r in recs]
    skipped = sum(rep.n_skipped for rep, _ in results)
    return MetricsReport.from_records(records, n_skipped=skipped), records


def evaluate(cfg: RunConfig, checkpoint_path, corpus_dir, out_path=None, workers: int = 1):
    """Evaluate a checkpoint on a corpus; optionally write the report JSON."""
    episodes = read_corpus(corpus_dir)
    model, _, _ = load_checkpoint(checkpoint_path, cfg, episodes[0].rig)
    report, _ = evaluate_episodes(model_predictor(model), episodes, workers=workers)
    if out_path is not None:
        out_path = Path(out_path)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        with open(out_path, "w") as f:
            json.dump(report.to_dict(), f, indent=2, sort_keys=True)
    return report
