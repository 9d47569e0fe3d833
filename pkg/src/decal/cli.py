"""Command-line interface: generate datasets, run experiments, compare, re-report."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import load_config_file
from .data import generate_synthetic, write_dataset
from .errors import ConfigError, DataError, DecalError
from .experiment import compare_initializations, run_experiment
from .presets import PRESETS, get_preset
from .report import emit_report, regenerate_report

EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_DATA_ERROR = 2
EXIT_RUNTIME_ERROR = 3


class _Parser(argparse.ArgumentParser):
    # malformed command lines are config errors (exit 1), not argparse's 2
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="decal", description="Patient-aware pool-based active learning engine.")
    parser.add_argument("-v", "--verbose", action="store_true", help="enable info-level logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("gen", help="generate a synthetic dataset CSV")
    gen.add_argument("--preset", required=True, choices=sorted(PRESETS), help="synthetic preset name")
    gen.add_argument("--seed", type=int, required=True, help="generator seed")
    gen.add_argument("--out", required=True, help="output CSV path")
    gen.set_defaults(handler=_cmd_gen)

    run = sub.add_parser("run", help="run one experiment from a config file")
    run.add_argument("--config", required=True, help="JSON config file")
    run.add_argument("--out", help="output directory (overrides config)")
    run.add_argument("--workers", type=int, default=1, help="parallel trial workers")
    run.set_defaults(handler=_cmd_run)

    cmp = sub.add_parser("compare", help="compare two configs differing only in init_mode")
    cmp.add_argument("--config-a", required=True, help="first JSON config (treatment if decal init)")
    cmp.add_argument("--config-b", required=True, help="second JSON config")
    cmp.add_argument("--round", type=int, required=True, help="round index to compare at")
    cmp.add_argument("--out", required=True, help="output directory")
    cmp.add_argument("--workers", type=int, default=1, help="parallel trial workers")
    cmp.set_defaults(handler=_cmd_compare)

    rep = sub.add_parser("report", help="regenerate aggregate CSV and plots from raw.csv")
    rep.add_argument("--in", dest="in_dir", required=True, help="directory containing raw.csv")
    rep.set_defaults(handler=_cmd_report)

    return parser


def _cmd_gen(args) -> int:
    split = generate_synthetic(get_preset(args.preset), args.seed)
    write_dataset(split, args.out)
    print(
        f"wrote {args.out}: pool {len(split.pool)} samples / "
        f"{len(set(split.pool.patients))} patients, test {len(split.test)} samples / "
        f"{len(set(split.test.patients))} patients, {split.num_classes} classes, d={split.feature_dim}"
    )
    return EXIT_OK


def _cmd_run(args) -> int:
    cfg = load_config_file(args.config)
    if args.out:
        cfg = replace(cfg, output_dir=args.out)
    if cfg.output_dir is None:
        raise ConfigError("output directory required: pass --out or set experiment.output_dir")
    result = run_experiment(cfg, workers=args.workers)
    paths = emit_report([result], cfg.output_dir)
    final = result.curve.mean_accuracy[-1]
    stderr = result.curve.stderr_accuracy[-1]
    print(
        f"{cfg.strategy} ({cfg.init_mode} init): {cfg.trials} trials, "
        f"final mean accuracy {final:.4f} +/- {stderr:.4f} (stderr) at train size "
        f"{result.curve.train_sizes[-1]}"
    )
    print(f"report written to {paths['raw'].parent}")
    return EXIT_OK


def _cmd_compare(args) -> int:
    cfg_a = load_config_file(args.config_a)
    cfg_b = load_config_file(args.config_b)
    comparison = compare_initializations(cfg_a, cfg_b, args.round, workers=args.workers)
    out = Path(args.out)
    emit_report([comparison.treatment_result, comparison.baseline_result], out)

    with open(out / "comparison.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([
            "strategy", "round", "treatment_init", "baseline_init",
            "treatment_mean", "treatment_std", "baseline_mean", "baseline_std",
            "percent_change", "mean_of_percent_changes", "percent_change_of_means",
        ])
        writer.writerow([
            comparison.strategy, comparison.round_index,
            comparison.treatment_mode, comparison.baseline_mode,
            repr(comparison.treatment_mean), repr(comparison.treatment_std),
            repr(comparison.baseline_mean), repr(comparison.baseline_std),
            repr(comparison.percent_change),
            repr(comparison.variants["mean_of_percent_changes"]),
            repr(comparison.variants["percent_change_of_means"]),
        ])

    print(
        f"round {comparison.round_index}, {comparison.strategy}: "
        f"{comparison.treatment_mode} init {comparison.treatment_mean:.4f} "
        f"+/- {comparison.treatment_std:.4f} vs {comparison.baseline_mode} init "
        f"{comparison.baseline_mean:.4f} +/- {comparison.baseline_std:.4f} "
        f"({comparison.percent_change:+.2f}%)"
    )
    return EXIT_OK


def _cmd_report(args) -> int:
    paths = regenerate_report(args.in_dir)
    print(f"regenerated {paths['aggregate']} and {len(paths['svg'])} plot(s)")
    return EXIT_OK


def main(argv=None) -> int:
    try:
        parser = _build_parser()
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
        return args.handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA_ERROR
    except DecalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME_ERROR
    except Exception as exc:  # noqa: BLE001 - CLI boundary maps everything to exit codes
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
