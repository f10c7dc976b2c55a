"""Evaluation of saved checkpoints against a stored benchmark."""

from pathlib import Path
from typing import Optional, Union

from app.config import LoggerMixin
from app.datasets.generator import EVAL, Dataset
from app.datasets.splits import Benchmark
from app.datasets.storage import load_dataset
from app.evaluation.metrics import evaluate
from app.models.metrics import MetricsRecord
from app.models.training import SplitMode
from app.services.training_service import load_model
from app.utils.exceptions import ConfigError

ROLES = ("source", "target")


def select_split(benchmark: Benchmark, domain: str, partition: Optional[int]) -> Dataset:
    if domain not in ROLES:
        raise ConfigError(f"domain must be one of {ROLES}, got {domain!r}")
    dataset: Dataset = getattr(benchmark, domain)
    return dataset if partition is None else dataset.subset(partition=partition)


class EvaluationService(LoggerMixin):
    """Evaluates checkpoints on one domain/partition of a benchmark file."""

    def evaluate_checkpoint(
        self,
        checkpoint: Union[str, Path],
        benchmark: Union[str, Path, Benchmark],
        domain: str = "target",
        partition: Optional[int] = EVAL,
        threshold: float = 0.5,
    ) -> MetricsRecord:
        if not isinstance(benchmark, Benchmark):
            benchmark = load_dataset(benchmark)
        net, params, extra = load_model(Path(checkpoint))
        if net.num_classes != benchmark.num_classes:
            raise ConfigError(
                f"checkpoint predicts {net.num_classes} classes but the dataset has {benchmark.num_classes}"
            )
        dataset = select_split(benchmark, domain, partition)
        # the source domain never holds unknown samples
        mode = benchmark.split.mode if domain == "target" else SplitMode.CLOSED
        record = evaluate(net, params, dataset, mode, threshold)
        self.log_event("Checkpoint evaluated", checkpoint=str(checkpoint), stage=extra.get("stage"),
                       domain=domain, accuracy=record.accuracy, attention_overlap=record.attention_overlap)
        return record


_evaluation_service: Optional[EvaluationService] = None


def get_evaluation_service() -> EvaluationService:
    """Get global evaluation service instance."""
    global _evaluation_service
    if _evaluation_service is None:
        _evaluation_service = EvaluationService()
    return _evaluation_service
