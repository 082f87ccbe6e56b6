"""Shared fixtures: a micro corpus and a briefly trained checkpoint."""

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from latentdrive.harness import RunConfig, train
from latentdrive.simworld import GenConfig, generate_corpus

MICRO_CONFIG_TEXT = """\
# micro run for fast end-to-end tests
model.d = 32
model.image_size = 32
model.views = 3
vocab.n = 512
optim.lr = 1e-3
optim.steps = 25
optim.batch_size = 2
run.precision = "float32"
run.seed = 3
run.checkpoint_every = 10
run.log_every = 5
"""


def micro_run_config(**overrides) -> RunConfig:
    base = dict(
        d=32, image_size=32, views=3, n_vocab=512, lr=1e-3, steps=25,
        batch_size=2, precision="float32", seed=3, checkpoint_every=10,
        log_every=5,
    )
    base.update(overrides)
    return RunConfig(**base)


@pytest.fixture(scope="session")
def micro_corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("data") / "micro_corpus"
    cfg = GenConfig(n_frames=12, image_size=32, feature_size=4, n_obstacles=(1, 3))
    generate_corpus(cfg, seed=77, episodes=2, out_dir=out)
    return out


@pytest.fixture(scope="session")
def micro_run(tmp_path_factory, micro_corpus):
    """A short but real training run: (config, corpus dir, run dir)."""
    run_dir = tmp_path_factory.mktemp("runs") / "micro"
    cfg = micro_run_config()
    train(cfg, micro_corpus, run_dir)
    return cfg, micro_corpus, run_dir


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run."""
    rows = {}
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py" not in nodeid:
                continue
            if getattr(rep, "when", "call") not in ("call", "setup"):
                continue
            name = nodeid.split("::")[-1]
            verdict = "PASS" if status == "passed" else "FAIL"
            if rows.get(name) != "FAIL":
                rows[name] = verdict
    if rows:
        terminalreporter.write_sep("-", "acceptance criteria")
        for name in sorted(rows):
            terminalreporter.write_line(f"{name}: {rows[name]}")
