"""evaluate: metrics of a saved checkpoint on one domain of a dataset."""

import argparse

from app.cli.dependencies import emit, experiment_config, require_dataset
from app.datasets.generator import EVAL, TRAIN
from app.services.evaluation_service import get_evaluation_service

PARTITIONS = {"train": TRAIN, "eval": EVAL, "all": None}


def register(subparsers) -> None:
    parser = subparsers.add_parser("evaluate", help="evaluate a checkpoint")
    parser.add_argument("--checkpoint", required=True)
    parser.add_argument("--dataset")
    parser.add_argument("--config")
    parser.add_argument("--domain", choices=["source", "target"], default="target")
    parser.add_argument("--partition", choices=list(PARTITIONS), default="eval")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = experiment_config(args)
    benchmark = require_dataset(config)
    record = get_evaluation_service().evaluate_checkpoint(
        args.checkpoint, benchmark, domain=args.domain, partition=PARTITIONS[args.partition],
        threshold=config.adapt.open_set_threshold,
    )
    emit(record.model_dump(mode="json"))
    return 0
