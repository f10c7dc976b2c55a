"""train-source: supervised training on the labeled source domain."""

import argparse
from pathlib import Path

from app.cli.dependencies import add_experiment_arguments, emit, experiment_config, require_dataset
from app.datasets.generator import TRAIN
from app.services.training_service import get_training_service
from app.utils.helpers import ensure_dir


def register(subparsers) -> None:
    parser = subparsers.add_parser("train-source", help="train the source model")
    add_experiment_arguments(parser)
    parser.add_argument("--cnn-only", action="store_true", dest="cnn_only",
                        help="build the CNN-only variant without transformer layers")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = experiment_config(args)
    benchmark = require_dataset(config)
    run_dir = ensure_dir(Path(config.output_dir))
    result = get_training_service().train_source(
        benchmark.source.subset(partition=TRAIN), config.adapt,
        use_transformer=not args.cnn_only, run_dir=run_dir,
    )
    emit({
        "checkpoint": str(result.checkpoint_path),
        "source_train_accuracy": result.train_accuracy,
        "epoch_losses": result.epoch_losses,
    })
    return 0
