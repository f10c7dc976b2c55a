"""adapt-target: teacher/student self-training from a source checkpoint."""

import argparse
from pathlib import Path

import pandas as pd

from app.cli.dependencies import add_experiment_arguments, emit, experiment_config, require_dataset
from app.config import run_context
from app.datasets.generator import EVAL, TRAIN
from app.models.training import MethodArm
from app.services.experiment_service import ArmResult
from app.services.training_service import build_manifest, get_training_service, load_model
from app.utils.exceptions import ConfigError
from app.utils.helpers import ensure_dir


def register(subparsers) -> None:
    parser = subparsers.add_parser("adapt-target", help="adapt a source checkpoint to the target domain")
    add_experiment_arguments(parser)
    parser.add_argument("--checkpoint", required=True, help="source checkpoint")
    parser.add_argument("--method", choices=[a.value for a in MethodArm if a.adapts],
                        help="ablation arm deciding which losses and teacher updates are active")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = experiment_config(args)
    if not config.method.adapts:
        raise ConfigError(f"method '{config.method.value}' does not adapt; use evaluate instead")
    benchmark = require_dataset(config)
    adapt_config = config.adapt.for_arm(config.method)
    expected = build_manifest(adapt_config, benchmark.num_classes, config.method.uses_transformer)
    net, params, _ = load_model(Path(args.checkpoint), expected)

    run_dir = ensure_dir(Path(config.output_dir))
    metrics_path = run_dir / "metrics.jsonl"
    metrics_path.unlink(missing_ok=True)
    context = {"method": config.method.value, "seed": adapt_config.seed}
    with run_context(stage="target", **context):
        state = get_training_service().adapt_target(
            net, params, benchmark.target.subset(partition=TRAIN), adapt_config,
            eval_dataset=benchmark.target.subset(partition=EVAL), split_mode=benchmark.split.mode,
            run_dir=run_dir, metrics_path=metrics_path, log_context=context,
        )
    result = ArmResult(config.method, adapt_config.seed, state.metrics_log, net, state.student)
    pd.DataFrame([result.summary().model_dump()]).to_csv(run_dir / "summary.csv", index=False,
                                                         float_format="%.6f")
    emit({"metrics": str(metrics_path), "final": state.metrics_log[-1].model_dump(mode="json")})
    return 0
