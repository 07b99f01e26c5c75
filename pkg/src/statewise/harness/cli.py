"""Command-line entry points: train, eval, sweep, verify."""

from __future__ import annotations

import argparse
import sys

from .checkpoint import CheckpointError
from .config import build_config, load_config_file
from .loop import evaluate, restore_pipeline, train
from .sweep import SWEEP_AXES, run_sweep


def _add_train_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--algo", help="td3 | reward_shaping | safety_layer | recovery | lagrangian | fac | usl")
    parser.add_argument("--env", help="stabilization | speedlimit | hazardworld")
    parser.add_argument("--steps", type=int, help="total training steps (default: per-env)")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument("--out", help="output directory for run folders")
    parser.add_argument(
        "--set",
        dest="sets",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override any config field (repeatable)",
    )


def _collect_overrides(args) -> dict:
    overrides: dict = {}
    for item in args.sets:
        if "=" not in item:
            raise SystemExit(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    if args.algo:
        overrides["algo"] = args.algo
    if args.env:
        overrides["env"] = args.env
    if args.steps is not None:
        overrides["total_steps"] = args.steps
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out:
        overrides["out"] = args.out
    return overrides


def _build_cfg(args):
    file_values = load_config_file(args.config) if args.config else None
    return build_config(file_values, _collect_overrides(args))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="statewise", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run one training experiment")
    _add_train_flags(p_train)

    p_eval = sub.add_parser("eval", help="evaluate a saved checkpoint")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--episodes", type=int, default=10)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--algo", help="expected algorithm; errors on mismatch")

    p_sweep = sub.add_parser("sweep", help="grid of runs over one hyperparameter axis")
    _add_train_flags(p_sweep)
    p_sweep.add_argument("--axis", required=True, choices=sorted(SWEEP_AXES))
    p_sweep.add_argument("--values", required=True, help="comma-separated values")
    p_sweep.add_argument("--seeds", help="comma-separated seeds (default: the one seed)")
    p_sweep.add_argument("--workers", type=int, default=1)

    sub.add_parser("verify", help="run the brute-force oracle suites")

    args = parser.parse_args(argv)

    if args.command == "train":
        run_dir = train(_build_cfg(args))
        print(f"run complete: {run_dir}")
        return 0

    if args.command == "eval":
        try:
            pipeline, cfg, step = restore_pipeline(args.checkpoint)
        except (CheckpointError, OSError) as err:
            print(f"error: {err}", file=sys.stderr)
            return 1
        if args.algo and args.algo != cfg.algo:
            print(
                f"error: checkpoint was trained with algo {cfg.algo!r}, not {args.algo!r}",
                file=sys.stderr,
            )
            return 1
        summary = evaluate(pipeline, cfg, step, args.episodes, args.seed)
        print(
            f"algo={cfg.algo} env={cfg.env} step={step} episodes={args.episodes}\n"
            f"return {summary.return_mean:.2f} +- {summary.return_std:.2f} | "
            f"cost rate {100 * summary.cost_rate_mean:.2f}% +- {100 * summary.cost_rate_std:.2f}% | "
            f"recovery {100 * summary.recovery_frac:.1f}% | "
            f"unroll iters {summary.usl_iters_mean:.2f} | act {summary.act_time_us:.1f} us"
        )
        return 0

    if args.command == "sweep":
        base = _build_cfg(args)
        values = [v.strip() for v in args.values.split(",") if v.strip()]
        seeds = (
            [int(s) for s in args.seeds.split(",") if s.strip()] if args.seeds else None
        )
        dirs = run_sweep(base, args.axis, values, seeds, max_workers=args.workers)
        for d in dirs:
            print(d)
        return 0

    from .verify import run_all

    return 1 if run_all() else 0


if __name__ == "__main__":
    raise SystemExit(main())
