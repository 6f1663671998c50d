"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 checkpoint/scenario
incompatibility, 4 training divergence.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, ExperimentConfig, scenario_preset
from .evaluation import IncompatibleEncodingError, Deployment, EvalReport, evaluate, export_trajectory
from .nets import DivergenceError
from .training import Orchestrator, run_ablation_suite
from . import sim

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INCOMPATIBLE = 3
EXIT_DIVERGENCE = 4


def _load_experiment(args) -> ExperimentConfig:
    if args.config:
        exp = ExperimentConfig.load(args.config)
    else:
        exp = ExperimentConfig.from_dict({"version": 1})
    if args.scenario:
        exp.arena = scenario_preset(args.scenario, exp.arena.n_obstacles,
                                    exp.arena.seed)
    if args.seed is not None:
        exp.train.seed = args.seed
        exp.arena.seed = args.seed
    return exp


def _apply_ablation_flags(exp: ExperimentConfig, args):
    if getattr(args, "fixed_h", None) is not None:
        exp.train.fixed_h = args.fixed_h
    if getattr(args, "no_imve", False):
        exp.train.disable_multistep = True
    if getattr(args, "skip_upper_pretrain", False):
        exp.train.skip_upper_pretrain = True
    if getattr(args, "skip_lower_pretrain", False):
        exp.train.skip_lower_pretrain = True


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pursuit-hrl",
        description="Pursuit-evasion swarm training and evaluation")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, ckpt=False):
        p.add_argument("--config", type=Path, help="experiment JSON config")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", type=Path, default=Path("out"))
        p.add_argument("--scenario", help="scenario preset, e.g. V10")
        if ckpt:
            p.add_argument("--checkpoint", type=Path, required=True)

    p = sub.add_parser("generate", help="generate instances and dump them as JSONL")
    common(p)
    p.add_argument("--count", type=int, default=10)

    for name in ("pretrain-upper", "pretrain-lower", "cross-train", "train"):
        p = sub.add_parser(name)
        common(p)
        p.add_argument("--fixed-h", type=int, default=None)
        p.add_argument("--no-imve", action="store_true")
        p.add_argument("--skip-upper-pretrain", action="store_true")
        p.add_argument("--skip-lower-pretrain", action="store_true")
        p.add_argument("--resume", type=Path, default=None,
                       help="checkpoint to continue from")

    p = sub.add_parser("ablate", help="run the pre-training ablation suite")
    common(p)

    p = sub.add_parser("evaluate")
    common(p, ckpt=True)
    p.add_argument("--instances", type=int, default=None)
    p.add_argument("--alloc", choices=["hrl", "random", "greedy"], default="hrl")

    p = sub.add_parser("generalize")
    common(p, ckpt=True)
    p.add_argument("--instances", type=int, default=None)

    p = sub.add_parser("export-trajectory")
    common(p, ckpt=True)
    p.add_argument("--instance-seed", type=int, default=0)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        exp = _load_experiment(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    try:
        if args.command == "generate":
            records = []
            for k in range(args.count):
                world = sim.generate_instance(exp.arena, k)
                records.append(sim.trajectory_record(world))
            sim.write_trajectory(records, out / "instances.jsonl")
            print(f"wrote {args.count} instances to {out / 'instances.jsonl'}")

        elif args.command in ("pretrain-upper", "pretrain-lower",
                              "cross-train", "train"):
            _apply_ablation_flags(exp, args)
            orch = Orchestrator(exp, out)
            if args.resume:
                orch.load(args.resume)
            if args.command == "pretrain-upper":
                orch.pretrain_upper()
            elif args.command == "pretrain-lower":
                orch.pretrain_lower()
            elif args.command == "cross-train":
                orch.cross_train()
            else:
                if not exp.train.skip_upper_pretrain:
                    orch.pretrain_upper()
                if not exp.train.skip_lower_pretrain:
                    orch.pretrain_lower()
                orch.cross_train()
            orch.write_logs()
            print(f"logs and checkpoints written to {out}")

        elif args.command == "ablate":
            path = run_ablation_suite(exp, out)
            print(f"ablation curves written to {path}")

        elif args.command in ("evaluate", "generalize"):
            n = args.instances or exp.eval_instances
            report = evaluate(exp, args.checkpoint, n, exp.eval_seed,
                              alloc_mode=getattr(args, "alloc", "hrl"))
            name = "eval_report" if args.command == "evaluate" else "generalize_report"
            report.write(out, name)
            print(json.dumps({
                "re_mean": report.mean_return,
                "ti_mean_ms": report.mean_decision_ms,
                "wr_percent": report.win_rate}, indent=2))

        elif args.command == "export-trajectory":
            path = export_trajectory(exp, args.checkpoint, args.instance_seed,
                                     out / f"trajectory_{args.instance_seed}.jsonl")
            print(f"trajectory written to {path}")

    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IncompatibleEncodingError as exc:
        print(f"incompatible checkpoint: {exc}", file=sys.stderr)
        return EXIT_INCOMPATIBLE
    except DivergenceError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
