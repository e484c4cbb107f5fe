"""Command-line entry point.

Subcommands: run, sweep, eval, response-map, contraction-test, grad-check,
plot. Exit codes: 0 success, 1 usage error, 2 runtime failure, 3 a
verification check (contraction-test, grad-check) failed.

Settings resolve as dataclass defaults, then ``--config`` file values, then
explicit flags.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from ..envs import game_names
from ..marl.config import ALGOS, GRAD_MODES, TrainerConfig
from ..verify import (
    GridSpec,
    TabularCooperativeGame,
    contraction_check,
    format_float,
    oracle_responses,
    response_agreement,
    response_map,
    write_metrics,
    write_response_map,
)
from .config import RunConfig
from .gradcheck import GRAD_TOL, check_all_losses
from .plots import PlotInputError, emit_plots
from .runner import eval_run, load_record, restore_trainer, run_id, run_single, sweep

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_CHECK = 0, 1, 2, 3
SHIFT_TOL = 1e-12
CONTRACTION_TOL = 1e-9

log = logging.getLogger("r2g")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# trainer flags exposed directly; anything else goes through --set
_TRAINER_FLAGS = {
    "algo": str, "k": int, "epochs": int, "steps_per_epoch": int, "batch_size": int,
    "grad_mode": str, "activation": str, "warmup_steps": int, "train_iters": int,
}


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _seed_list(text: str) -> list[int]:
    """``5`` means seeds 0..4; ``0,3,7`` lists them explicitly."""
    vals = _int_list(text)
    if "," not in text and len(vals) == 1:
        if vals[0] < 1:
            raise argparse.ArgumentTypeError("seed count must be >= 1")
        return list(range(vals[0]))
    return vals


def _add_run_flags(p: argparse.ArgumentParser, sweep_mode: bool = False) -> None:
    p.add_argument("--config", type=Path, help="YAML RunConfig file; flags override its values")
    p.add_argument("--env", help=f"one of: {', '.join(game_names())}")
    p.add_argument("--algo", help=f"one of: {', '.join(ALGOS)}")
    if sweep_mode:
        p.add_argument("--k", type=_int_list, help="comma-separated recursion levels, e.g. 0,1,2")
        p.add_argument("--seeds", type=_seed_list, help="seed count N (seeds 0..N-1) or a comma list")
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--reuse", action="store_true", help="skip runs whose outputs already match the config")
    else:
        p.add_argument("--k", type=int)
        p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--steps-per-epoch", dest="steps_per_epoch", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--train-iters", dest="train_iters", type=int)
    p.add_argument("--grad-mode", dest="grad_mode", help=f"one of: {', '.join(GRAD_MODES)}")
    p.add_argument("--activation")
    p.add_argument("--warmup-steps", dest="warmup_steps", type=int)
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="FIELD=VALUE",
                   help="override any trainer field, value parsed as YAML")


def resolve_config(args: argparse.Namespace, sweep_mode: bool = False) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    trainer = cfg.trainer.to_dict()
    for name in _TRAINER_FLAGS:
        if name == "k" and sweep_mode:
            continue
        val = getattr(args, name, None)
        if val is not None:
            trainer[name] = val
    for item in args.overrides:
        key, sep, raw = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects FIELD=VALUE, got {item!r}")
        trainer[key.strip()] = yaml.safe_load(raw)
    top = cfg.to_dict()
    top["trainer"] = trainer
    if args.env is not None:
        top["env"] = args.env
    if args.output_dir is not None:
        top["output_dir"] = args.output_dir
    if sweep_mode and args.seeds is not None:
        top["seeds"] = args.seeds
    if not sweep_mode and args.seed is not None:
        top["seeds"] = [args.seed]
    try:
        return RunConfig.from_dict(top)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="r2g", description="Recursive reasoning graph experiments on Markov games.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="train one (env, algo, seed)")
    _add_run_flags(p)

    p = sub.add_parser("sweep", help="train every (k, seed) combination")
    _add_run_flags(p, sweep_mode=True)

    p = sub.add_parser("eval", help="deterministic evaluation of a finished run")
    p.add_argument("--run", type=Path, required=True, help="run directory")
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("response-map", help="central-actor responses over an opponent-action grid")
    p.add_argument("--run", type=Path, required=True)
    p.add_argument("--resolution", type=int, default=41)

    p = sub.add_parser("contraction-test", help="check the soft level-k operator is a gamma-contraction")
    p.add_argument("--gamma", type=float, default=0.99)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--states", type=int, default=5)
    p.add_argument("--actions", type=int, default=7)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("grad-check", help="finite-difference check of every training loss")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=GRAD_TOL)

    p = sub.add_parser("plot", help="write SVG figures for a run directory")
    p.add_argument("--run", type=Path, required=True)
    p.add_argument("--out", type=Path, default=None)
    return parser


def _progress(m) -> None:
    acts = ", ".join(f"{a[0]:+.3f}" for a in m.most_likely)
    log.info("epoch %d  most-likely (%s)  returns %s", m.epoch, acts, np.round(m.returns, 3).tolist())


def cmd_run(args) -> int:
    cfg = resolve_config(args)
    rec = run_single(cfg, progress=_progress if args.verbose else None)
    print(f"{rec.run_id}: wrote {rec.path} in {rec.wall_clock:.1f}s")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = resolve_config(args, sweep_mode=True)
    results = sweep(cfg, args.k, workers=args.workers, reuse=args.reuse)
    for rid, status in results:
        print(f"{rid}: {status}")
    return EXIT_OK if all(s == "ok" for _, s in results) else EXIT_RUNTIME


def cmd_eval(args) -> int:
    rec = load_record(args.run)
    rets = eval_run(args.run, episodes=args.episodes, seed=args.seed)
    rid = run_id(rec.config, rec.config.seeds[0])
    write_metrics(args.run / "metrics.csv", [(rid, f"eval_return_agent{i}", r) for i, r in enumerate(rets)],
                  append=True)
    for i, r in enumerate(rets):
        print(f"agent {i}: mean return {format_float(r)}")
    return EXIT_OK


def cmd_response_map(args) -> int:
    trainer = restore_trainer(args.run)
    if not getattr(trainer, "central_actors", None) or trainer.central_actors[0] is None:
        raise UsageError("run has no central actors (needs algo r2g with k >= 1)")
    if trainer.n != 2:
        raise UsageError("response maps are defined for two-player games")
    grid = GridSpec(args.resolution)
    s = trainer.env.reset(0)
    rows, metrics = [], []
    rid = run_id(load_record(args.run).config, trainer.cfg.seed)
    for ag in trainer.agents:
        mine = response_map(ag.central_actor, s, grid, ag.index)
        rows.extend(mine)
        agree = response_agreement(mine, oracle_responses(ag.critic, s, grid, ag.index), grid)
        metrics.append((rid, f"oracle_agreement_agent{ag.index}", agree))
    write_response_map(args.run / "response_map.csv", rows)
    write_metrics(args.run / "metrics.csv", metrics, append=True)
    for _, name, v in metrics:
        print(f"{name}: {v:.3f}")
    return EXIT_OK


def cmd_contraction(args) -> int:
    game = TabularCooperativeGame.random(args.seed, args.states, args.actions, args.alpha)
    worst = contraction_check(game, args.gamma, args.trials, rng=args.seed + 1)
    shifted = contraction_check(game, args.gamma, args.trials, rng=args.seed + 2, shift=True)
    ok = worst <= args.gamma + CONTRACTION_TOL and abs(shifted - args.gamma) <= SHIFT_TOL
    print(f"max ratio {format_float(worst)} (gamma {args.gamma}); constant-shift ratio {format_float(shifted)}")
    print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_grad_check(args) -> int:
    errs = check_all_losses(args.trials, args.seed)
    for name, err in errs.items():
        print(f"{name:20s} max relative error {err:.3e}")
    ok = max(errs.values()) <= args.tol
    print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_plot(args) -> int:
    for path in emit_plots(args.run, args.out):
        print(path)
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "eval": cmd_eval,
    "response-map": cmd_response_map,
    "contraction-test": cmd_contraction,
    "grad-check": cmd_grad_check,
    "plot": cmd_plot,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PlotInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:
        log.exception("command failed")
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
