"""generate-data: write the synthetic benchmark to one file."""

import argparse

from app.cli.dependencies import emit
from app.config import get_logger
from app.datasets.splits import make_benchmark, max_classes
from app.datasets.storage import save_dataset
from app.models.training import SplitMode

logger = get_logger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("generate-data", help="generate the synthetic domain-shift benchmark")
    parser.add_argument("--mode", choices=[m.value for m in SplitMode], default=SplitMode.CLOSED.value)
    parser.add_argument(
        "--classes", type=int, default=4,
        help=f"K; at most {max_classes(SplitMode.CLOSED)} for closed and partial splits, "
             f"{max_classes(SplitMode.OPEN)} for open splits (unknown shapes need room)",
    )
    parser.add_argument("--per-domain", type=int, default=2000, dest="per_domain",
                        help="training samples per domain")
    parser.add_argument("--eval-per-domain", type=int, default=500, dest="eval_per_domain")
    parser.add_argument("--image-side", type=int, default=32, dest="image_side")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", required=True, help="dataset file to write")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    benchmark = make_benchmark(
        SplitMode(args.mode), args.classes, args.seed,
        per_domain=args.per_domain, eval_per_domain=args.eval_per_domain, image_side=args.image_side,
    )
    path = save_dataset(args.out, benchmark)
    logger.info("Dataset written", path=str(path), mode=args.mode, classes=args.classes)
    emit({
        "path": str(path),
        "mode": args.mode,
        "num_classes": benchmark.num_classes,
        "source_samples": len(benchmark.source),
        "target_samples": len(benchmark.target),
        "target_classes": benchmark.split.target_classes,
        "unknown_shape_ids": benchmark.split.target_unknown_classes,
    })
    return 0
