"""attention-report: object-mask overlap of attention per arm, focused vs non-focused accuracy."""

import argparse

from app.cli.dependencies import add_experiment_arguments, emit, experiment_config, require_dataset, seed_list
from app.services.experiment_service import get_experiment_service


def register(subparsers) -> None:
    parser = subparsers.add_parser("attention-report", help="attention overlap analysis")
    add_experiment_arguments(parser)
    parser.add_argument("--seeds", type=int, default=5)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = experiment_config(args)
    benchmark = require_dataset(config)
    report = get_experiment_service().attention_report(
        benchmark, config, seed_list(args.seeds, config.adapt.seed))
    summary = report.groupby("method", sort=False)[
        ["mean_overlap", "accuracy", "focused_accuracy", "unfocused_accuracy"]].mean()
    emit({"output_dir": config.output_dir, "per_method": summary.reset_index().to_dict(orient="records")})
    return 0
