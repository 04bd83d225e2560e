"""Command-line interface.

Verbs: generate, train, eval, ablate, report. Exit codes: 0 success,
2 config error, 3 data error. The VALEN_OUT_ROOT environment variable,
when set, is prepended to relative output directories.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

from .data import (
    BongardConfig,
    RpmConfig,
    generate_bongard_dataset,
    generate_rpm_dataset,
    load_dataset,
    save_dataset,
)
from .errors import ConfigError, DataError, GenerationError
from .harness import RunConfig, SolverBundle, ablate, evaluate, report, train
from .harness.training import train as _train
from .methods.sbr import pretrain_reinit

_METHOD_ALIASES = {
    "tine": "valen+tine",
    "funny": "funny+valen",
    "sbr": "sbr+valen",
    "funny+tine": "funny+valen+tine",
}


def _resolve_out(path: str) -> str:
    root = os.environ.get("VALEN_OUT_ROOT")
    if root and not Path(path).is_absolute():
        return str(Path(root) / path)
    return path


def _cmd_generate(args) -> int:
    if args.kind == "rpm":
        rules = tuple(args.rules.split(",")) if args.rules else RpmConfig.__dataclass_fields__["rules"].default
        instances, manifest = generate_rpm_dataset(
            RpmConfig(instance_count=args.count, seed=args.seed, rules=rules)
        )
    else:
        instances, manifest = generate_bongard_dataset(
            BongardConfig(instance_count=args.count, seed=args.seed)
        )
    save_dataset(_resolve_out(args.out), instances, manifest)
    print(f"wrote {len(instances)} {args.kind} instances to {args.out}")
    return 0


def _build_config(args) -> RunConfig:
    if args.config:
        config = RunConfig.from_file(args.config)
    else:
        if not args.dataset or not args.out:
            raise ConfigError("train requires --dataset and --out (or --config FILE)")
        config = RunConfig(dataset=args.dataset, out_dir=args.out)
    overrides = {
        "method": _METHOD_ALIASES.get(args.method, args.method) if args.method else None,
        "dataset": args.dataset,
        "out_dir": args.out,
        "eval_dataset": args.eval_dataset,
        "epochs": args.epochs,
        "batch_size": args.batch_size,
        "lr": args.lr,
        "seed": args.seed,
        "ablation": args.ablation,
        "decoder": args.decoder,
        "gen_steps": args.gen_steps,
        "solver_steps": args.solver_steps,
        "dim": args.dim,
        "n_views": args.n_views,
    }
    for key, value in overrides.items():
        if value is not None:
            config = dataclasses.replace(config, **{key: value})
    config = dataclasses.replace(config, out_dir=_resolve_out(config.out_dir))
    return config


def _cmd_train(args) -> int:
    if args.method == "sbr-pretrain" or args.then_reinit:
        return _cmd_train_reinit(args)
    config = _build_config(args)
    _, run_report = train(config)
    print(json.dumps(run_report["metrics"], indent=2))
    return 0


def _cmd_train_reinit(args) -> int:
    """OOD procedure: train sbr+valen, reinitialize the pattern extractor
    and consistency analyzer, then retrain without the mixture loss on the
    target dataset, keeping the representation extractor."""
    if not args.ood_dataset:
        raise ConfigError("--method sbr-pretrain requires --ood-dataset")
    args.method = "sbr+valen"
    config = _build_config(args)
    pretrain_dir = Path(config.out_dir) / "pretrain"
    finetune_dir = Path(config.out_dir) / "finetune"
    pre_cfg = dataclasses.replace(config, out_dir=str(pretrain_dir))
    bundle, pre_report = train(pre_cfg)

    pretrain_reinit(bundle.solver, seed=config.seed + 1)
    fine_cfg = dataclasses.replace(
        config, method="valen", dataset=args.ood_dataset, out_dir=str(finetune_dir)
    )
    _, fine_report = _train_warm(fine_cfg, bundle.solver.state_dict())
    print(json.dumps({"pretrain": pre_report["metrics"], "finetune": fine_report["metrics"]},
                     indent=2))
    return 0


def _train_warm(config: RunConfig, solver_state) -> tuple:
    """Train with solver parameters warm-started from a state dict."""
    from .harness import training as _t

    original = _t.SolverBundle

    class WarmBundle(original):
        def __init__(self, cfg, kind, vocab):
            super().__init__(cfg, kind, vocab)
            self.solver.load_state_dict(solver_state)

    _t.SolverBundle = WarmBundle
    try:
        return _t.train(config)
    finally:
        _t.SolverBundle = original


def _cmd_eval(args) -> int:
    bundle = SolverBundle.load(args.checkpoint)
    instances, manifest = load_dataset(args.dataset)
    metrics = evaluate(bundle, instances, manifest)
    if args.report == "patterns" and "pattern_accuracy" not in metrics:
        raise ConfigError("--report patterns requires an sbr-trained checkpoint")
    print(json.dumps(metrics, indent=2))
    return 0


def _cmd_ablate(args) -> int:
    config = RunConfig(
        dataset=args.dataset,
        out_dir=_resolve_out(args.out),
        method="funny+valen",
        epochs=args.epochs,
        batch_size=args.batch_size or 32,
        seed=args.seed or 0,
    )
    result = ablate(config)
    print(result["table"])
    return 0


def _cmd_report(args) -> int:
    out = report(args.run_dirs, _resolve_out(args.out))
    print(json.dumps(out, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="valen")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate a mini dataset")
    gen.add_argument("--kind", choices=["rpm", "bongard"], required=True)
    gen.add_argument("--count", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.add_argument("--rules", help="comma-separated rule names (rpm only)")
    gen.set_defaults(func=_cmd_generate)

    tr = sub.add_parser("train", help="train a method combination")
    tr.add_argument("--config", help="key=value config file")
    tr.add_argument("--dataset")
    tr.add_argument("--eval-dataset", dest="eval_dataset")
    tr.add_argument("--ood-dataset", dest="ood_dataset")
    tr.add_argument("--out")
    tr.add_argument("--method")
    tr.add_argument("--then-reinit", action="store_true", dest="then_reinit")
    tr.add_argument("--epochs", type=int)
    tr.add_argument("--batch-size", type=int, dest="batch_size")
    tr.add_argument("--lr", type=float)
    tr.add_argument("--seed", type=int)
    tr.add_argument("--ablation", choices=["full", "f1", "f2", "f3"])
    tr.add_argument("--decoder", choices=["half-split", "normal"])
    tr.add_argument("--gen-steps", type=int, dest="gen_steps")
    tr.add_argument("--solver-steps", type=int, dest="solver_steps")
    tr.add_argument("--dim", type=int)
    tr.add_argument("--n-views", type=int, dest="n_views")
    tr.set_defaults(func=_cmd_train)

    ev = sub.add_parser("eval", help="evaluate a checkpoint")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--dataset", required=True)
    ev.add_argument("--report", choices=["patterns"])
    ev.set_defaults(func=_cmd_eval)

    ab = sub.add_parser("ablate", help="run the funny ablation matrix")
    ab.add_argument("--dataset", required=True)
    ab.add_argument("--out", required=True)
    ab.add_argument("--epochs", type=int, default=5)
    ab.add_argument("--batch-size", type=int, dest="batch_size")
    ab.add_argument("--seed", type=int)
    ab.set_defaults(func=_cmd_ablate)

    rp = sub.add_parser("report", help="plots and summaries over run dirs")
    rp.add_argument("run_dirs", nargs="+")
    rp.add_argument("--out", required=True)
    rp.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, GenerationError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
