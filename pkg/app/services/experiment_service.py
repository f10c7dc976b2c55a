"""Ablation matrix and attention-overlap report over method arms and seeds."""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from app.config import LoggerMixin, run_context
from app.datasets.generator import EVAL, TRAIN
from app.datasets.splits import Benchmark
from app.evaluation.metrics import evaluate, predict, predicted_labels
from app.evaluation.attention import overlap_per_sample
from app.models.metrics import MetricsRecord, SummaryRow
from app.models.training import DEFAULT_ARMS, AdaptConfig, ExperimentConfig, MethodArm
from app.nn.network import TransDANet
from app.nn.params import ModelParams
from app.services.training_service import SourceResult, TrainingService, get_training_service
from app.utils.helpers import ensure_dir, mean_std

ATTENTION_ARMS = [
    MethodArm.SOURCE_ONLY_TRANSFORMER,
    MethodArm.BASELINE,
    MethodArm.TRANSFORMER,
    MethodArm.TRANSFORMER_EMA,
    MethodArm.TRANSFORMER_KD,
]

# config fields that differ between arms but never affect source training
_ARM_ONLY_FIELDS = {"ema_momentum": True, "loss": {"alpha_sl": True, "beta_kd": True}}

SALIENCY_HEADER = [
    "# saliency (transformer arms): attention received per token, column mean of the softmax maps "
    "averaged over heads and layers, nearest-upsampled to the image and normalized to sum 1",
    "# saliency (CNN-only arms): L2 norm of the final feature map per spatial cell, "
    "nearest-upsampled and normalized to sum 1",
    "# overlap: saliency mass inside the ground-truth object mask; focused = overlap > per-run median",
]


@dataclass
class ArmResult:
    arm: MethodArm
    seed: int
    records: List[MetricsRecord]
    net: TransDANet
    params: ModelParams

    @property
    def final(self) -> MetricsRecord:
        return self.records[-1]

    def summary(self) -> SummaryRow:
        """Mean over the run's per-epoch records."""
        def avg(values):
            present = [v for v in values if v is not None]
            return float(np.mean(present)) if present else None

        return SummaryRow(
            method=self.arm.value,
            seed=self.seed,
            accuracy=avg(r.accuracy for r in self.records),
            attention_overlap=avg(r.attention_overlap for r in self.records),
            pseudo_label_accuracy=avg(r.pseudo_label_accuracy for r in self.records),
        )


class ExperimentService(LoggerMixin):
    """Runs method arms over seeds and aggregates their metrics."""

    def __init__(self, training: Optional[TrainingService] = None):
        self.training = training or get_training_service()
        # the benchmark is held so its id cannot be reused while cached
        self._sources: Dict[Tuple[int, str, str, bool], Tuple[Benchmark, SourceResult]] = {}
        self._arms: Dict[Tuple[int, str, str, str], Tuple[Benchmark, ArmResult]] = {}

    def source_model(self, benchmark: Benchmark, config: AdaptConfig, use_transformer: bool,
                     out_dir: Path) -> SourceResult:
        """Source models are shared by every arm with the same seed and architecture."""
        source_fields = config.model_dump_json(exclude=_ARM_ONLY_FIELDS)
        key = (id(benchmark), str(out_dir), source_fields, use_transformer)
        if key not in self._sources:
            tag = "transformer" if use_transformer else "cnn"
            run_dir = ensure_dir(out_dir / f"seed_{config.seed}" / f"source_{tag}")
            result = self.training.train_source(
                benchmark.source.subset(partition=TRAIN), config, use_transformer, run_dir)
            self._sources[key] = (benchmark, result)
        return self._sources[key][1]

    def run_arm(self, benchmark: Benchmark, arm: MethodArm, seed: int,
                experiment: ExperimentConfig) -> ArmResult:
        """Train (or reuse) one arm; the ablation matrix and the attention report share runs."""
        config = experiment.adapt.for_arm(arm).model_copy(update={"seed": seed})
        key = (id(benchmark), experiment.output_dir, arm.value, config.model_dump_json())
        if key not in self._arms:
            self._arms[key] = (benchmark, self._train_arm(benchmark, arm, seed, config, experiment))
        return self._arms[key][1]

    def _train_arm(self, benchmark: Benchmark, arm: MethodArm, seed: int, config: AdaptConfig,
                   experiment: ExperimentConfig) -> ArmResult:
        out_dir = Path(experiment.output_dir)
        run_dir = ensure_dir(out_dir / f"seed_{seed}" / arm.value)
        metrics_path = run_dir / "metrics.jsonl"
        metrics_path.unlink(missing_ok=True)
        context = {"method": arm.value, "seed": seed}
        target_eval = benchmark.target.subset(partition=EVAL)
        split_mode = benchmark.split.mode

        with run_context(**context):
            source = self.source_model(benchmark, config, arm.uses_transformer, out_dir)
            if not arm.adapts:
                record = evaluate(source.net, source.params, target_eval, split_mode, config.open_set_threshold)
                with open(metrics_path, "w", encoding="utf-8") as handle:
                    line = record.to_log_line(stage="source_only", **context)
                    handle.write(json.dumps(line, sort_keys=True) + "\n")
                self.log_event("Arm finished", accuracy=record.accuracy)
                return ArmResult(arm, seed, [record], source.net, source.params)

            state = self.training.adapt_target(
                source.net, source.params, benchmark.target.subset(partition=TRAIN), config,
                eval_dataset=target_eval, split_mode=split_mode, run_dir=run_dir,
                metrics_path=metrics_path, log_context=context,
            )
            self.log_event("Arm finished", accuracy=state.metrics_log[-1].accuracy)
            return ArmResult(arm, seed, state.metrics_log, source.net, state.student)

    def run_ablation_matrix(
        self,
        benchmark: Benchmark,
        experiment: ExperimentConfig,
        seeds: Sequence[int],
        arms: Sequence[MethodArm] = DEFAULT_ARMS,
    ) -> pd.DataFrame:
        """Every arm x seed; writes summary.csv and the mean +- std table5.csv."""
        out_dir = ensure_dir(experiment.output_dir)
        results = [self.run_arm(benchmark, arm, seed, experiment) for seed in seeds for arm in arms]

        summary = pd.DataFrame([r.summary().model_dump() for r in results],
                               columns=list(SummaryRow.model_fields))
        summary.to_csv(out_dir / "summary.csv", index=False, float_format="%.6f")

        table = build_table(results, arms)
        table.to_csv(out_dir / "table5.csv", index=False, float_format="%.6f")
        self.log_event("Ablation matrix written", rows=len(table), seeds=len(seeds), out_dir=str(out_dir))
        return table

    def attention_report(
        self,
        benchmark: Benchmark,
        experiment: ExperimentConfig,
        seeds: Sequence[int],
        arms: Sequence[MethodArm] = ATTENTION_ARMS,
    ) -> pd.DataFrame:
        """Per-arm mean overlap and accuracy of focused vs non-focused target samples."""
        out_dir = ensure_dir(experiment.output_dir)
        target_eval = benchmark.target.subset(partition=EVAL)
        rows = []
        for seed in seeds:
            for arm in arms:
                result = self.run_arm(benchmark, arm, seed, experiment)
                samples = per_sample_overlap(result, target_eval, benchmark,
                                             experiment.adapt.open_set_threshold)
                samples.to_csv(out_dir / f"seed_{seed}" / arm.value / "overlap_per_sample.csv",
                               index=False, float_format="%.6f")
                rows.append(focus_split(samples, arm, seed))

        report = pd.DataFrame(rows)
        path = out_dir / "attention_report.csv"
        with open(path, "w", encoding="utf-8") as handle:
            handle.write("\n".join(SALIENCY_HEADER) + "\n")
            report.to_csv(handle, index=False, float_format="%.6f")
        self.log_event("Attention report written", path=str(path), arms=len(arms), seeds=len(seeds))
        return report


def per_sample_overlap(result: ArmResult, dataset, benchmark: Benchmark, threshold: float) -> pd.DataFrame:
    preds = predict(result.net, result.params, dataset.images)
    predicted = predicted_labels(preds.probs, benchmark.split.mode, threshold)
    return pd.DataFrame({
        "sample_id": np.arange(len(dataset)),
        "label": dataset.labels,
        "predicted": predicted,
        "correct": (predicted == dataset.labels).astype(int),
        "overlap": overlap_per_sample(preds.saliency, dataset.masks),
    })


def focus_split(samples: pd.DataFrame, arm: MethodArm, seed: int) -> Dict[str, object]:
    """Focused samples have overlap strictly above the run's median."""
    median = float(samples["overlap"].median())
    focused = samples["overlap"] > median
    return {
        "method": arm.value,
        "seed": seed,
        "mean_overlap": float(samples["overlap"].mean()),
        "median_overlap": median,
        "accuracy": float(samples["correct"].mean()),
        "focused_accuracy": float(samples.loc[focused, "correct"].mean()) if focused.any() else np.nan,
        "unfocused_accuracy": float(samples.loc[~focused, "correct"].mean()) if (~focused).any() else np.nan,
        "focused_count": int(focused.sum()),
    }


def build_table(results: Sequence[ArmResult], arms: Sequence[MethodArm]) -> pd.DataFrame:
    """One row per arm: mean and std over seeds of the final-epoch metrics."""
    rows = []
    for arm in arms:
        finals = [r.final for r in results if r.arm == arm]
        acc_mean, acc_std = mean_std([f.accuracy for f in finals])
        overlaps = [f.attention_overlap for f in finals if f.attention_overlap is not None]
        ov_mean, ov_std = mean_std(overlaps) if overlaps else (np.nan, np.nan)
        rows.append({
            "method": arm.label,
            "arm": arm.value,
            "seeds": len(finals),
            "accuracy_mean": acc_mean,
            "accuracy_std": acc_std,
            "attention_overlap_mean": ov_mean,
            "attention_overlap_std": ov_std,
        })
    return pd.DataFrame(rows)


_experiment_service: Optional[ExperimentService] = None


def get_experiment_service() -> ExperimentService:
    """Get global experiment service instance."""
    global _experiment_service
    if _experiment_service is None:
        _experiment_service = ExperimentService()
    return _experiment_service
