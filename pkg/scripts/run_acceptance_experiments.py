"""Train (or reuse) every run the acceptance suite reads.

Usage:
    python scripts/run_acceptance_experiments.py [--root DIR] [--workers N] [--only NAME ...]

Finished runs whose config snapshot matches are skipped, so the script can
be interrupted and restarted.
"""

from __future__ import annotations

import argparse
import logging
import time

from r2g.harness.experiments import acceptance_configs, artifacts_root
from r2g.harness.runner import sweep


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--root", default=None, help="artifact directory (default: artifacts/acceptance)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--only", nargs="*", default=None, help="subset of experiment names")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    configs = acceptance_configs(args.root or artifacts_root())
    for name, cfg in configs.items():
        if args.only and name not in args.only:
            continue
        start = time.perf_counter()
        results = sweep(cfg, workers=args.workers, reuse=True)
        for rid, status in results:
            logging.info("%s %s", rid, status)
        logging.info("%s done in %.0fs", name, time.perf_counter() - start)


if __name__ == "__main__":
    main()
