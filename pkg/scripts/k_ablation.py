"""Recursion-depth ablation: train R2G with several k on one game and report final actions.

Usage:
    python scripts/k_ablation.py --env max_two --k 0,1,2 --seeds 5 --epochs 300 --out runs/ablation
"""

from __future__ import annotations

import argparse

from r2g.harness.config import RunConfig
from r2g.harness.runner import sweep
from r2g.marl import TrainerConfig
from r2g.verify import TrajectoryLog


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--env", default="max_two")
    p.add_argument("--k", default="0,1,2")
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--epochs", type=int, default=1000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="runs/ablation")
    args = p.parse_args()

    ks = [int(x) for x in args.k.split(",")]
    base = RunConfig(env=args.env, seeds=tuple(range(args.seeds)), output_dir=args.out,
                     trainer=TrainerConfig(algo="r2g", epochs=args.epochs))
    sweep(base, ks, workers=args.workers, reuse=True)
    for k in ks:
        finals = []
        for seed in base.seeds:
            path = base.run_dir(seed).parent.parent / f"r2g-k{k}" / f"seed{seed}"
            finals.append(TrajectoryLog.from_csv(path / "trajectory.csv").actions[-1])
        print(f"k={k}: " + "  ".join("(" + ", ".join(f"{x:+.2f}" for x in a) + ")" for a in finals))


if __name__ == "__main__":
    main()
