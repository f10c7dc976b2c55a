"""Source training and teacher/student target adaptation."""

import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np
from pydantic import ValidationError
from tqdm import tqdm

from app.adaptation.losses import ce_smooth, im_loss, kd_loss, sl_loss, total_target_loss
from app.adaptation.pseudo import PseudoLabeler, PseudoLabels
from app.config import LoggerMixin, get_settings
from app.core.checkpoint import load_checkpoint, save_checkpoint
from app.core.optim import SgdMomentumState, sgd_step
from app.core.tensor import backward, clear_tape
from app.datasets.generator import Dataset
from app.evaluation.metrics import evaluate, predict
from app.models.architecture import HeadConfig, ModelManifest
from app.models.metrics import LossBreakdown, MetricsRecord
from app.models.training import AdaptConfig, SplitMode
from app.nn.ema import ema_update
from app.nn.network import TransDANet
from app.nn.params import ModelParams, ParamGroup
from app.utils.exceptions import ContractError, ManifestError
from app.utils.helpers import batch_slices, first_error

MIN_BATCH = 2


@dataclass
class SourceResult:
    net: TransDANet
    params: ModelParams
    epoch_losses: List[float]
    train_accuracy: float
    checkpoint_path: Optional[Path] = None


@dataclass
class TrainState:
    net: TransDANet
    student: ModelParams
    teacher: ModelParams
    optimizer: SgdMomentumState
    epoch: int = 0
    step: int = 0
    metrics_log: List[MetricsRecord] = field(default_factory=list)
    pseudo_labels: Optional[PseudoLabels] = None


StepCallback = Callable[[TrainState], None]


def build_manifest(config: AdaptConfig, num_classes: int, use_transformer: bool) -> ModelManifest:
    return ModelManifest(
        backbone=config.backbone,
        transformer=config.transformer,
        head=HeadConfig(bottleneck_dim=config.bottleneck_dim, num_classes=num_classes),
        use_transformer=use_transformer,
    )


def save_model(path: Path, net: TransDANet, params: ModelParams, **extra) -> Path:
    payload = {"manifest": net.manifest.model_dump(mode="json"), **extra}
    return save_checkpoint(path, params.state_dict(), payload)


def load_model(path: Path, expected: Optional[ModelManifest] = None):
    """Rebuild network and parameters from a self-describing checkpoint."""
    tensors, extra = load_checkpoint(path)
    if "manifest" not in extra:
        raise ManifestError(f"Checkpoint {path} carries no model manifest")
    try:
        manifest = ModelManifest.model_validate(extra["manifest"])
    except ValidationError as exc:
        raise ManifestError(f"Checkpoint {path} has an invalid model manifest: {first_error(exc)}") from exc
    if expected is not None and manifest != expected:
        raise ManifestError(
            "Checkpoint architecture does not match the requested model",
            {"checkpoint": manifest.model_dump(mode="json"), "requested": expected.model_dump(mode="json")},
        )
    net = TransDANet(manifest)
    params = net.init_params(seed=0)
    params.load_state_dict(tensors)
    return net, params, extra


def _shuffled_batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for rows in batch_slices(n, batch_size):
        if rows.stop - rows.start >= MIN_BATCH:
            yield order[rows]


def _write_jsonl(path: Optional[Path], line: Dict) -> None:
    if path is None:
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a", encoding="utf-8") as handle:
        handle.write(json.dumps(line, sort_keys=True) + "\n")


class TrainingService(LoggerMixin):
    """Runs both training stages for one method arm and seed."""

    def __init__(self, show_progress: Optional[bool] = None):
        settings = get_settings()
        if show_progress is None:
            show_progress = (settings.runtime.show_progress and sys.stderr.isatty()
                             and settings.observability.log_level in ("DEBUG", "INFO"))
        self.show_progress = show_progress

    def _progress(self, iterable, total: int, desc: str):
        return tqdm(iterable, total=total, desc=desc, leave=False, disable=not self.show_progress)

    def train_source(
        self,
        dataset: Dataset,
        config: AdaptConfig,
        use_transformer: bool = True,
        run_dir: Optional[Path] = None,
    ) -> SourceResult:
        """Minimize label-smoothed CE on labeled source data."""
        if len(dataset) < MIN_BATCH:
            raise ContractError(f"source training needs at least {MIN_BATCH} samples")
        manifest = build_manifest(config, dataset.num_classes, use_transformer)
        net = TransDANet(manifest)
        params = net.init_params(config.seed)
        histogram = dataset.class_histogram()
        absent = np.flatnonzero(histogram == 0).tolist()
        if absent:
            self.log_warning("Source classes absent from training data; their classifier rows stay untrained",
                             classes=absent)

        optimizer = SgdMomentumState.for_params(params, config.lr_per_group, config.momentum,
                                                config.weight_decay)
        rng = np.random.default_rng([config.seed, 1])
        n_batches = len(dataset) // config.batch_size + 1
        epoch_losses: List[float] = []
        for epoch in range(1, config.source_epochs + 1):
            total, count = 0.0, 0
            batches = _shuffled_batches(len(dataset), config.batch_size, rng)
            for rows in self._progress(batches, n_batches, f"source {epoch}"):
                params.zero_grad()
                out = net.forward(params, dataset.images[rows], training=True)
                loss = ce_smooth(out.logits, dataset.labels[rows], config.loss.smoothing)
                backward(loss)
                sgd_step(params, optimizer)
                total += loss.item() * len(rows)
                count += len(rows)
            epoch_losses.append(total / count)
            self.log_event("Source epoch finished", epoch=epoch, L_src=epoch_losses[-1])

        record = evaluate(net, params, dataset)
        self.log_event("Source training finished", source_train_accuracy=record.accuracy,
                       use_transformer=use_transformer)
        result = SourceResult(net=net, params=params, epoch_losses=epoch_losses,
                              train_accuracy=record.accuracy)
        if run_dir is not None:
            result.checkpoint_path = save_model(
                Path(run_dir) / "source.ckpt", net, params,
                stage="source", seed=config.seed, source_train_accuracy=record.accuracy,
            )
        return result

    def init_state(self, net: TransDANet, source_params: ModelParams, config: AdaptConfig) -> TrainState:
        """Teacher and student both start from the source weights; the classifier is frozen."""
        student = source_params.clone(requires_grad=True)
        student.freeze(ParamGroup.CLASSIFIER)
        teacher = source_params.clone(requires_grad=False)
        teacher.freeze(ParamGroup.CLASSIFIER)
        optimizer = SgdMomentumState.for_params(student, config.lr_per_group, config.momentum,
                                                config.weight_decay)
        return TrainState(net=net, student=student, teacher=teacher, optimizer=optimizer)

    def pseudo_label(self, state: TrainState, dataset: Dataset, config: AdaptConfig) -> PseudoLabels:
        """Teacher pass in eval mode over the full unlabeled target set."""
        teacher_out = predict(state.net, state.teacher, dataset.images)
        return PseudoLabeler(config.tau).generate(teacher_out.features, teacher_out.probs)

    def _assert_no_frozen_grads(self, state: TrainState) -> None:
        for name, tensor in state.teacher.named_tensors():
            if tensor.grad is not None:
                raise ContractError(f"teacher tensor '{name}' received a gradient")
        for name, tensor in state.student.group_tensors(ParamGroup.CLASSIFIER):
            if tensor.grad is not None:
                raise ContractError(f"frozen classifier tensor '{name}' received a gradient")

    def adapt_target(
        self,
        net: TransDANet,
        source_params: ModelParams,
        dataset: Dataset,
        config: AdaptConfig,
        eval_dataset: Optional[Dataset] = None,
        split_mode: SplitMode = SplitMode.CLOSED,
        run_dir: Optional[Path] = None,
        metrics_path: Optional[Path] = None,
        log_context: Optional[Dict] = None,
        on_step: Optional[StepCallback] = None,
    ) -> TrainState:
        """Self-training of the student on unlabeled target data with an EMA teacher.

        Target labels are read only for evaluation and pseudo-label accuracy.
        """
        # raises ManifestError on missing, unexpected or reshaped tensors
        net.init_params(0).load_state_dict(source_params.state_dict())
        if len(dataset) < MIN_BATCH:
            raise ContractError(f"target adaptation needs at least {MIN_BATCH} samples")

        state = self.init_state(net, source_params, config)
        classifier_before = {n: t.data.copy() for n, t in state.student.group_tensors(ParamGroup.CLASSIFIER)}
        rng = np.random.default_rng([config.seed, 2])
        n_batches = len(dataset) // config.batch_size + 1
        known = dataset.known_mask
        context = dict(log_context or {})

        for epoch in range(1, config.target_epochs + 1):
            state.epoch = epoch
            labels = self.pseudo_label(state, dataset, config)
            state.pseudo_labels = labels
            pseudo_accuracy = labels.accuracy(dataset.labels, known)
            if config.dump_pseudo_labels and run_dir is not None:
                labels.dump_csv(Path(run_dir) / f"pseudo_labels_epoch_{epoch:02d}.csv")

            sums = {"im": 0.0, "sl": 0.0, "kd": 0.0, "tgt": 0.0}
            seen = 0
            batches = _shuffled_batches(len(dataset), config.batch_size, rng)
            for rows in self._progress(batches, n_batches, f"target {epoch}"):
                state.student.zero_grad()
                out = net.forward(state.student, dataset.images[rows], training=True)
                l_im = im_loss(out.logits)
                l_sl = sl_loss(out.logits, labels.hard[rows])
                l_kd = kd_loss(out.logits, labels.soft[rows])
                l_tgt = total_target_loss(l_im, l_sl, l_kd, config.loss)
                backward(l_tgt)
                self._assert_no_frozen_grads(state)
                sgd_step(state.student, state.optimizer)
                ema_update(state.teacher, state.student, config.ema_momentum)
                state.step += 1
                for key, value in zip(sums, (l_im, l_sl, l_kd, l_tgt)):
                    sums[key] += value.item() * len(rows)
                seen += len(rows)
                if on_step is not None:
                    on_step(state)
            clear_tape()

            losses = LossBreakdown(**{key: value / seen for key, value in sums.items()})
            record = evaluate(net, state.student, eval_dataset if eval_dataset is not None else dataset,
                              split_mode, config.open_set_threshold, epoch=epoch, losses=losses,
                              pseudo_label_accuracy=pseudo_accuracy)
            state.metrics_log.append(record)
            _write_jsonl(metrics_path, record.to_log_line(stage="target", **context))
            self.log_event("Target epoch finished", **record.to_log_line())

        for name, tensor in state.student.group_tensors(ParamGroup.CLASSIFIER):
            if not np.array_equal(tensor.data, classifier_before[name]):
                raise ContractError(f"frozen classifier tensor '{name}' changed during adaptation")
        if run_dir is not None:
            save_model(Path(run_dir) / "student.ckpt", net, state.student, stage="student", seed=config.seed)
            save_model(Path(run_dir) / "teacher.ckpt", net, state.teacher, stage="teacher", seed=config.seed)
        return state


_training_service: Optional[TrainingService] = None


def get_training_service() -> TrainingService:
    """Get global training service instance."""
    global _training_service
    if _training_service is None:
        _training_service = TrainingService()
    return _training_service
