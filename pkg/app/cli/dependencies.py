"""Shared CLI plumbing: argument parsing errors, config loading, output."""

import argparse
import json
import sys
from typing import Any, Dict, List, Optional

from app.config import build_experiment_config, get_settings, load_experiment_config
from app.datasets.splits import Benchmark
from app.datasets.storage import load_dataset
from app.models.training import ExperimentConfig
from app.utils.exceptions import ConfigError


class CliArgumentParser(argparse.ArgumentParser):
    """argparse that reports usage errors as ConfigError (exit 1) instead of exiting 2."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        raise ConfigError(f"{self.prog}: {message}")


def add_experiment_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--dataset", help="dataset file written by generate-data")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--seed", type=int, help="model seed")
    parser.add_argument("--source-epochs", type=int, dest="source_epochs")
    parser.add_argument("--target-epochs", type=int, dest="target_epochs")


def experiment_config(args: argparse.Namespace) -> ExperimentConfig:
    """Config file first, then command-line overrides."""
    defaults = ExperimentConfig(output_dir=get_settings().paths.output_dir)
    base = load_experiment_config(args.config, defaults) if getattr(args, "config", None) else defaults
    overrides: Dict[str, Any] = {}
    for flag, key in (("dataset", "dataset_path"), ("out", "output_dir"), ("seed", "seed"),
                      ("source_epochs", "source_epochs"), ("target_epochs", "target_epochs"),
                      ("method", "method")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    return build_experiment_config(overrides, base) if overrides else base


def require_dataset(config: ExperimentConfig) -> Benchmark:
    if not config.dataset_path:
        raise ConfigError("no dataset given: pass --dataset or set dataset_path in the config file")
    return load_dataset(config.dataset_path)


def seed_list(count: int, base: int) -> List[int]:
    if count < 1:
        raise ConfigError(f"--seeds must be at least 1, got {count}")
    return [base + i for i in range(count)]


def emit(payload: Any, stream: Optional[Any] = None) -> None:
    """Command results go to stdout as JSON."""
    stream = stream or sys.stdout
    stream.write(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")
