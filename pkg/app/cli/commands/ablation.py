"""ablation: every method arm over several seeds."""

import argparse

from app.cli.dependencies import add_experiment_arguments, emit, experiment_config, require_dataset, seed_list
from app.models.training import DEFAULT_ARMS, MethodArm
from app.services.experiment_service import get_experiment_service


def register(subparsers) -> None:
    parser = subparsers.add_parser("ablation", help="run the ablation matrix")
    add_experiment_arguments(parser)
    parser.add_argument("--seeds", type=int, default=5, help="number of model seeds")
    parser.add_argument("--with-source-transformer", action="store_true", dest="with_source_transformer",
                        help="add the source-only transformer row")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = experiment_config(args)
    benchmark = require_dataset(config)
    arms = list(DEFAULT_ARMS)
    if args.with_source_transformer:
        arms.insert(1, MethodArm.SOURCE_ONLY_TRANSFORMER)
    table = get_experiment_service().run_ablation_matrix(
        benchmark, config, seed_list(args.seeds, config.adapt.seed), arms)
    emit({"output_dir": config.output_dir, "table": table.to_dict(orient="records")})
    return 0
