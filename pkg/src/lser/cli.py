"""Command line entry point: ``lser <command> [options]``.

Experiment options can come from ``--config FILE`` (flat ``key=value`` lines,
same keys as :class:`lser.harness.ExperimentConfig`, ``env.``-prefixed for the
environment) and are overridden by explicit flags. CSV goes to ``--out`` or
stdout. Exit status: 0 success, 1 invalid configuration, 2 failed LSH check.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import sys
from contextlib import contextmanager
from pathlib import Path

from lser import harness
from lser.env import EnvConfig
from lser.errors import InvalidConfigError
from lser.harness import ExperimentConfig

EXIT_OK, EXIT_CONFIG, EXIT_CHECK = 0, 1, 2


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="flat key=value experiment file")
    g = p.add_argument_group("experiment")
    for f in dataclasses.fields(ExperimentConfig):
        if f.name == "env":
            continue
        g.add_argument(_flag(f.name), dest=f.name, default=None, metavar="V")
    e = p.add_argument_group("environment")
    for f in dataclasses.fields(EnvConfig):
        e.add_argument("--env-" + f.name.replace("_", "-"), dest="env." + f.name, default=None, metavar="V")


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if args.config is not None:
        cfg = ExperimentConfig.from_text(args.config.read_text(), cfg)
    top, env = {}, {}
    for key, value in vars(args).items():
        if value is None or key in ("config", "command", "out", "func"):
            continue
        if key.startswith("env."):
            env[key[4:]] = value
        elif key in {f.name for f in dataclasses.fields(ExperimentConfig)}:
            top[key] = value
    if "seed" in top and "seed" not in env:
        env["seed"] = top["seed"]
    return cfg.updated(top, env).validate()


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


@contextmanager
def _output(path: Path | None):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="") as f:
            yield f


def cmd_train(args) -> int:
    cfg = _config_from_args(args)
    arm = harness.run_arm(cfg)
    with _output(args.out) as f:
        harness.write_metrics_csv([arm], f)
    if args.checkpoint is not None:
        from lser.agent import save_checkpoint

        save_checkpoint(arm.agent, args.checkpoint, {"run": cfg.seed, "env": cfg.env.seed})
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _config_from_args(args)
    arms = harness.run_variant_comparison(cfg, args.variants.split(","), args.seeds, workers=args.workers)
    with _output(args.out) as f:
        harness.write_metrics_csv(arms, f)
    rows = harness.summarize(arms, key=lambda a: a.config.variant, window=args.window)
    if args.summary_out is not None:
        with open(args.summary_out, "w", newline="") as f:
            harness.write_dict_csv(rows, f, harness.SUMMARY_FIELDS)
    for r in rows:
        print(f"{r['arm']}: final CTR {r['final_ctr_mean']:.4f} +/- {r['final_ctr_ci95']:.4f} (95% CI, {r['seeds']} seeds)", file=sys.stderr)
    return EXIT_OK


def cmd_sweep_hash(args) -> int:
    cfg = _config_from_args(args)
    rows, arms = harness.run_hyperplane_sweep(cfg, args.values, args.seeds, workers=args.workers)
    with _output(args.out) as f:
        harness.write_dict_csv(rows, f, harness.SUMMARY_FIELDS)
    if args.episodes_out is not None:
        with open(args.episodes_out, "w", newline="") as f:
            harness.write_metrics_csv(arms, f)
    return EXIT_OK


def cmd_sweep_eps(args) -> int:
    cfg = _config_from_args(args)
    rows, arms = harness.run_epsilon_sweep(cfg, args.values, args.seeds, workers=args.workers)
    with _output(args.out) as f:
        harness.write_dict_csv(rows, f, harness.SUMMARY_FIELDS)
    if args.episodes_out is not None:
        with open(args.episodes_out, "w", newline="") as f:
            harness.write_metrics_csv(arms, f)
    return EXIT_OK


def cmd_bench(args) -> int:
    rows = harness.bench_buffers(args.sizes, args.bucket_size, args.batch, args.ops, seed=args.seed)
    with _output(args.out) as f:
        harness.write_dict_csv(rows, f, harness.BENCH_FIELDS)
    return EXIT_OK


def cmd_validate_lsh(args) -> int:
    angles = [math.radians(a) for a in args.angles]
    rows, ok = harness.validate_lsh(args.trials, angles, d=args.dim, seed=args.seed, tol=args.tolerance)
    with _output(args.out) as f:
        harness.write_dict_csv(rows, f, harness.VALIDATE_FIELDS)
    return EXIT_OK if ok else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lser", description="Locality-sensitive experience replay experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one arm, one CSV row per episode")
    _add_experiment_flags(p)
    p.add_argument("--out", type=Path)
    p.add_argument("--checkpoint", type=Path, help="write the trained agent here")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("compare", help="paired comparison of replay variants across seeds")
    _add_experiment_flags(p)
    p.add_argument("--variants", default="lser,uniform")
    p.add_argument("--seeds", type=_int_list, default=[0, 1, 2, 3, 4])
    p.add_argument("--window", type=int, default=100, help="final-window length for the summary")
    p.add_argument("--summary-out", type=Path)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep-hash", help="one arm per number of hyperplanes")
    _add_experiment_flags(p)
    p.add_argument("--values", type=_int_list, default=list(harness.HYPERPLANE_VALUES))
    p.add_argument("--seeds", type=_int_list, default=[0])
    p.add_argument("--episodes-out", type=Path)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_sweep_hash)

    p = sub.add_parser("sweep-eps", help="one arm per greedy threshold")
    _add_experiment_flags(p)
    p.add_argument("--values", type=_float_list, default=list(harness.EPSILON_VALUES))
    p.add_argument("--seeds", type=_int_list, default=[0])
    p.add_argument("--episodes-out", type=Path)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_sweep_eps)

    p = sub.add_parser("bench", help="per-operation latency of the replay buffers (timings vary run to run)")
    p.add_argument("--sizes", type=_int_list, default=[6_400, 64_000])
    p.add_argument("--bucket-size", type=int, default=64)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--ops", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("validate-lsh", help="check per-bit collision rates against 1 - theta/pi")
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--angles", type=_float_list, default=[0, 30, 60, 90, 120], help="degrees")
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--tolerance", type=float, default=0.02)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_validate_lsh)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InvalidConfigError as exc:
        print(f"lser: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
