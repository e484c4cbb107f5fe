"""Single runs, sweeps, and the on-disk run record.

A run directory holds::

    config.yaml       snapshot of the RunConfig for this seed
    trajectory.csv    epoch, agent_id, action_dim, most_likely_action
    returns.csv       epoch, agent_id, mean_return
    losses.csv        epoch, agent_id, component, loss
    checkpoints/      agent<i>.npz
    record.json       wall-clock and completion marker (not part of the CSV contract)

Every CSV is a pure function of the config, so repeated runs are
byte-identical.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from filelock import FileLock

from ..envs import make_game
from ..marl import EpochMetrics, load_agent_arrays, make_trainer, save_agents
from ..verify import format_float
from .config import RunConfig

log = logging.getLogger(__name__)

CSV_FILES = ("trajectory.csv", "returns.csv", "losses.csv")
INDEX_COLUMNS = ("run_id", "env", "algo", "k", "seed", "path", "status")


@dataclass
class RunRecord:
    config: RunConfig
    path: Path
    wall_clock: float
    history: list[EpochMetrics] | None = None

    @property
    def run_id(self) -> str:
        return run_id(self.config, self.config.seeds[0])


def run_id(cfg: RunConfig, seed: int) -> str:
    return f"{cfg.env}/{cfg.algo}-k{cfg.k}/seed{int(seed)}"


class _CsvSink:
    def __init__(self, path: Path, header: Sequence[str]):
        self.fh = open(path, "w", newline="")
        self.writer = csv.writer(self.fh, lineterminator="\n")
        self.writer.writerow(header)

    def row(self, *cells) -> None:
        self.writer.writerow([format_float(c) if isinstance(c, float) else c for c in cells])

    def close(self) -> None:
        self.fh.close()


def run_single(cfg: RunConfig, seed: int | None = None, progress: Callable[[EpochMetrics], None] | None = None) -> RunRecord:
    """Train one (env, algo, seed) and write its run directory."""
    seed = cfg.seeds[0] if seed is None else int(seed)
    cfg = cfg.for_seed(seed)
    out = cfg.run_dir(seed)
    out.mkdir(parents=True, exist_ok=True)
    done_marker = out / "record.json"
    if done_marker.exists():
        done_marker.unlink()
    cfg.save(out / "config.yaml")

    env = make_game(cfg.env)
    trainer = make_trainer(env, cfg.trainer)
    sinks = {
        "trajectory": _CsvSink(out / "trajectory.csv", ("epoch", "agent_id", "action_dim", "most_likely_action")),
        "returns": _CsvSink(out / "returns.csv", ("epoch", "agent_id", "mean_return")),
        "losses": _CsvSink(out / "losses.csv", ("epoch", "agent_id", "component", "loss")),
    }
    start = time.perf_counter()
    try:
        for _ in range(cfg.trainer.epochs):
            m = trainer.train_epoch()
            for i, act in enumerate(m.most_likely):
                for d, x in enumerate(act):
                    sinks["trajectory"].row(m.epoch, i, d, float(x))
            for i, r in enumerate(m.returns):
                sinks["returns"].row(m.epoch, i, float(r))
            for comp in sorted(m.losses):
                for i, v in enumerate(m.losses[comp]):
                    sinks["losses"].row(m.epoch, i, comp, float(v))
            if progress is not None:
                progress(m)
    finally:
        for s in sinks.values():
            s.close()
    wall = time.perf_counter() - start
    save_agents(out / "checkpoints", trainer.agents, {"env": cfg.env, "algo": cfg.algo, "k": cfg.k, "seed": seed})
    done_marker.write_text(json.dumps({"run_id": run_id(cfg, seed), "wall_clock_s": wall}, indent=2) + "\n")
    return RunRecord(cfg, out, wall)


def load_record(path: str | Path) -> RunRecord:
    path = Path(path)
    cfg = RunConfig.load(path / "config.yaml")
    meta = json.loads((path / "record.json").read_text())
    return RunRecord(cfg, path, float(meta["wall_clock_s"]))


def is_complete(cfg: RunConfig, seed: int) -> bool:
    """True when the run directory exists, finished, and was produced by exactly this config."""
    out = cfg.run_dir(seed)
    if not (out / "record.json").exists() or not all((out / f).exists() for f in CSV_FILES):
        return False
    try:
        return RunConfig.load(out / "config.yaml") == cfg.for_seed(seed)
    except (OSError, ValueError):
        return False


def ensure_run(cfg: RunConfig, seed: int) -> RunRecord:
    """Reuse a finished run with an identical config snapshot, otherwise train it."""
    if is_complete(cfg, seed):
        return load_record(cfg.run_dir(seed))
    return run_single(cfg, seed)


# -- sweeps ------------------------------------------------------------------------------


def append_index(index_path: Path, rows: Sequence[Sequence]) -> None:
    """Append rows to the shared sweep index under a file lock."""
    index_path.parent.mkdir(parents=True, exist_ok=True)
    with FileLock(str(index_path) + ".lock"):
        fresh = not index_path.exists()
        with open(index_path, "a", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            if fresh:
                w.writerow(INDEX_COLUMNS)
            w.writerows(rows)


def _sweep_worker(payload: tuple[dict, int, bool]) -> tuple[str, str]:
    cfg_dict, seed, reuse = payload
    cfg = RunConfig.from_dict(cfg_dict)
    rid = run_id(cfg, seed)
    try:
        rec = ensure_run(cfg, seed) if reuse else run_single(cfg, seed)
        status = "ok"
        path = str(rec.path)
    except Exception as exc:  # recorded in the index; the sweep carries on
        log.exception("run %s failed", rid)
        status = f"failed: {type(exc).__name__}"
        path = str(cfg.run_dir(seed))
    append_index(Path(cfg.output_dir) / "sweep_index.csv",
                 [(rid, cfg.env, cfg.algo, cfg.k, seed, path, status)])
    return rid, status


def sweep_configs(base: RunConfig, ks: Sequence[int] | None = None) -> list[RunConfig]:
    if not ks:
        return [base]
    return [replace(base, trainer=replace(base.trainer, k=int(k))) for k in ks]


def sweep(base: RunConfig, ks: Sequence[int] | None = None, workers: int | None = None,
          reuse: bool = False) -> list[tuple[str, str]]:
    """Run every (k, seed) combination; returns ``(run_id, status)`` in submission order.

    Each run owns its directory, so parallel and sequential execution give
    the same artifacts.
    """
    jobs = [(c.to_dict(), s, reuse) for c in sweep_configs(base, ks) for s in base.seeds]
    workers = workers or min(len(jobs), os.cpu_count() or 1)
    if workers <= 1:
        return [_sweep_worker(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_sweep_worker, jobs))


# -- evaluation --------------------------------------------------------------------------


def restore_trainer(path: str | Path):
    """Rebuild a trainer from a run directory and load its checkpoints."""
    rec = load_record(path)
    trainer = make_trainer(make_game(rec.config.env), rec.config.trainer)
    for ag in trainer.agents:
        load_agent_arrays(ag, Path(path) / "checkpoints" / f"agent{ag.index}.npz")
    return trainer


def eval_policies(checkpoint_dir: str | Path, env_name: str, cfg, episodes: int = 100, seed: int = 0) -> np.ndarray:
    """Mean per-agent return of most-likely actions over ``episodes`` episodes.

    ``cfg`` is the TrainerConfig that shaped the checkpointed networks.
    """
    env = make_game(env_name)
    trainer = make_trainer(env, cfg)
    for ag in trainer.agents:
        load_agent_arrays(ag, Path(checkpoint_dir) / f"agent{ag.index}.npz")
    rng = np.random.default_rng(seed)
    totals = np.zeros(env.spec.n_agents)
    for _ in range(episodes):
        state = env.reset(int(rng.integers(2**31)))
        ret = np.zeros(env.spec.n_agents)
        for _ in range(env.spec.max_episode_length):
            res = env.step(state, trainer.most_likely(state))
            ret += res.rewards
            state = res.next_state
            if res.terminal:
                break
        totals += ret
    return totals / episodes


def eval_run(path: str | Path, episodes: int = 100, seed: int = 0) -> np.ndarray:
    rec = load_record(path)
    return eval_policies(Path(path) / "checkpoints", rec.config.env, rec.config.trainer, episodes, seed)
