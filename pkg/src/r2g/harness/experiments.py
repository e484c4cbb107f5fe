"""The fixed set of training runs behind the acceptance suite.

Runs are cached under an artifacts directory keyed by their full config
snapshot (see :func:`r2g.harness.runner.ensure_run`), so the suite only
trains what is missing or stale.
"""

from __future__ import annotations

import os
from pathlib import Path

from ..marl.config import TrainerConfig
from .config import RunConfig

ACCEPTANCE_SEEDS = (0, 1, 2, 3, 4)
DEFAULT_ROOT = Path(__file__).resolve().parents[3] / "artifacts" / "acceptance"

# (name, env, algo, k)
ACCEPTANCE_RUNS = (
    ("zero_sum_r2g", "zero_sum", "r2g", 1),
    ("zero_sum_masac", "zero_sum", "masac", 0),
    ("max_two_r2g", "max_two", "r2g", 1),
    ("max_two_masac", "max_two", "masac", 0),
    ("max_two_maddpg", "max_two", "maddpg", 0),
)


def artifacts_root() -> Path:
    return Path(os.environ.get("R2G_ARTIFACTS", DEFAULT_ROOT))


def acceptance_configs(root: str | Path | None = None) -> dict[str, RunConfig]:
    """Named RunConfigs with default trainer settings over seeds 0..4."""
    root = Path(root) if root is not None else artifacts_root()
    return {
        name: RunConfig(env=env, seeds=ACCEPTANCE_SEEDS, output_dir=str(root),
                        trainer=TrainerConfig(algo=algo, k=k))
        for name, env, algo, k in ACCEPTANCE_RUNS
    }
