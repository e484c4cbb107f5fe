"""Summarise cached acceptance runs and draw their figures.

For every experiment and seed this prints the final most-likely joint
action, the deterministic evaluation return and the number of +-0.5 band
crossings of agent 1 in the last 500 epochs, and writes SVG plots next to
each run.

Usage:
    python scripts/summarize_runs.py [--root DIR] [--no-plots]
"""

from __future__ import annotations

import argparse

from r2g.harness.experiments import ACCEPTANCE_SEEDS, acceptance_configs, artifacts_root
from r2g.harness.plots import emit_plots
from r2g.harness.runner import eval_run, is_complete
from r2g.verify import TrajectoryLog, oscillation_score


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--root", default=None)
    p.add_argument("--no-plots", action="store_true")
    args = p.parse_args()

    for name, cfg in acceptance_configs(args.root or artifacts_root()).items():
        print(name)
        for seed in ACCEPTANCE_SEEDS:
            if not is_complete(cfg, seed):
                print(f"  seed {seed}: missing")
                continue
            path = cfg.run_dir(seed)
            log = TrajectoryLog.from_csv(path / "trajectory.csv")
            final = ", ".join(f"{x:+.3f}" for x in log.actions[-1])
            ret = ", ".join(f"{r:.2f}" for r in eval_run(path, episodes=100))
            window = min(500, len(log))
            osc = oscillation_score(log, -0.5, 0.5, window)
            print(f"  seed {seed}: final ({final})  return ({ret})  crossings {osc}")
            if not args.no_plots:
                emit_plots(path)


if __name__ == "__main__":
    main()
