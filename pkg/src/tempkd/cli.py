"""Command-line interface for the distillation laboratory.

Exit codes: 0 success, 1 usage or config error, 2 runtime failure,
3 verification failure (failed gradient checks).
"""

from __future__ import annotations

import argparse
import sys

from . import harness
from .config import ConfigError, ExperimentConfig, load_config


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; this suite reserves 2 for
    runtime failures, so usage errors are remapped to 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="tempkd",
        description="Knowledge-distillation experiments with a dynamic "
                    "temperature scheduler.",
    )
    sub = parser.add_subparsers(dest="command", required=True,
                                metavar="command")

    def experiment_command(name, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", metavar="PATH",
                       help="JSON experiment config (defaults apply "
                            "when omitted)")
        p.add_argument("--output-dir", metavar="PATH",
                       help="overrides the config's output_dir")
        p.add_argument("--seeds", metavar="N", type=int, nargs="+",
                       help="overrides the config's seeds list")
        return p

    experiment_command("generate-data",
                       "Generate the synthetic train/test CSV files.")
    experiment_command("train-teacher",
                       "Train and checkpoint the teacher network.")
    experiment_command("distill",
                       "Distill the student with the configured scheduler, "
                       "one run per seed (teacher checkpoint required).")
    experiment_command("compare",
                       "Run every configured scheduler across all seeds "
                       "and emit the ranked summary table.")
    experiment_command("sweep",
                       "Run the dynamic scheduler across each temperature "
                       "range and emit range-vs-accuracy plot data.")

    p = sub.add_parser(
        "grad-check",
        help="Verify analytic gradients against finite differences.",
        description="Verify every analytic gradient against central "
                    "finite differences; exits 3 on any failure.",
    )
    p.add_argument("--seed", type=int, default=0,
                   help="RNG seed for the random instances (default 0)")
    p.add_argument("--perturb", action="store_true",
                   help="negative control: corrupt the analytic gradients "
                        "first, so the suite must fail")
    return parser


def _load(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    if args.output_dir:
        config.output_dir = args.output_dir
    if args.seeds:
        if len(set(args.seeds)) != len(args.seeds):
            raise ConfigError(f"--seeds: duplicates in {args.seeds}")
        config.seeds = tuple(args.seeds)
    return config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "grad-check":
        ok, results = harness.run_grad_check(args.seed, perturb=args.perturb)
        for r in results:
            print(r.line())
        if not ok:
            print("gradient verification FAILED", file=sys.stderr)
            return 3
        print("all gradient checks passed")
        return 0

    try:
        config = _load(args)
    except ConfigError as exc:
        print(f"tempkd: config error: {exc}", file=sys.stderr)
        return 1

    try:
        out = config.output_dir
        if args.command == "generate-data":
            info = harness.run_generate_data(config, out)
            print(f"wrote {info['train_path']} ({info['train_rows']} rows) "
                  f"and {info['test_path']} ({info['test_rows']} rows); "
                  f"{info['num_classes']} classes, dim {info['dim']}")
        elif args.command == "train-teacher":
            result = harness.run_train_teacher(config, out)
            print(f"teacher: train accuracy {result.train_accuracy:.4f}, "
                  f"test accuracy {result.test_accuracy:.4f}")
            print(f"checkpoint: {harness.teacher_checkpoint_path(out)}")
        elif args.command == "distill":
            for result in harness.run_distill(config, out):
                print(f"{result.name}: test accuracy "
                      f"{result.test_accuracy:.4f}")
        elif args.command == "compare":
            rows, failures, summary_path = harness.run_compare(config, out)
            for label, seed, message in failures:
                print(f"warning: run {label}-s{seed} failed: {message}",
                      file=sys.stderr)
            print(harness.compare_table(rows))
            print(f"summary: {summary_path}")
        elif args.command == "sweep":
            rows, sweep_path = harness.run_sweep(config, out)
            for label, mean in rows:
                print(f"{label}: mean test accuracy {mean:.4f}")
            print(f"plot data: {sweep_path}")
    except ConfigError as exc:
        print(f"tempkd: config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"tempkd: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
