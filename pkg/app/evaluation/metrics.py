"""Accuracy metrics for closed, partial and open-set evaluation."""

from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np
from scipy.special import softmax

from app.core.tensor import no_grad
from app.datasets.generator import UNKNOWN_LABEL, Dataset
from app.evaluation.attention import activation_saliency, overlap_per_sample, token_saliency
from app.models.metrics import LossBreakdown, MetricsRecord
from app.models.training import SplitMode
from app.nn.network import TransDANet
from app.nn.params import ModelParams
from app.utils.exceptions import ContractError
from app.utils.helpers import batch_slices

DEFAULT_EVAL_BATCH = 128


@dataclass
class Predictions:
    logits: np.ndarray       # N x K
    features: np.ndarray     # N x d
    saliency: np.ndarray     # N x u, attention column mass or CNN activation magnitude

    @property
    def probs(self) -> np.ndarray:
        return softmax(self.logits.astype(np.float64), axis=1)


def predict(net: TransDANet, params: ModelParams, images: np.ndarray,
            batch_size: int = DEFAULT_EVAL_BATCH) -> Predictions:
    """Eval-mode forward pass over ``images`` without recording a tape."""
    if len(images) == 0:
        raise ContractError("cannot predict on an empty set")
    logits: List[np.ndarray] = []
    features: List[np.ndarray] = []
    saliency: List[np.ndarray] = []
    with no_grad():
        for rows in batch_slices(len(images), batch_size):
            out = net.forward(params, images[rows], training=False)
            logits.append(out.logits.data.copy())
            features.append(out.features.data.copy())
            if out.attention_maps is not None:
                saliency.append(token_saliency(out.attention_maps))
            else:
                saliency.append(activation_saliency(out.feature_map))
    return Predictions(np.concatenate(logits), np.concatenate(features), np.concatenate(saliency))


def predicted_labels(probs: np.ndarray, split_mode: SplitMode, threshold: float = 0.5) -> np.ndarray:
    """argmax, with open-set predictions below ``threshold`` confidence mapped to unknown."""
    labels = np.argmax(probs, axis=1).astype(np.int64)
    if SplitMode(split_mode) == SplitMode.OPEN:
        labels[probs.max(axis=1) < threshold] = UNKNOWN_LABEL
    return labels


def classification_metrics(predicted: np.ndarray, labels: np.ndarray, num_classes: int,
                           split_mode: SplitMode) -> Dict[str, object]:
    if len(labels) == 0:
        raise ContractError("cannot evaluate on an empty set")
    correct = predicted == labels
    per_class: List[Optional[float]] = []
    for cls in range(num_classes):
        rows = labels == cls
        per_class.append(float(correct[rows].mean()) if rows.any() else None)
    present = [acc for acc in per_class if acc is not None]
    known = labels != UNKNOWN_LABEL
    result: Dict[str, object] = {
        "accuracy": float(correct.mean()),
        "per_class_accuracy": per_class,
        "balanced_accuracy": float(np.mean(present)) if present else 0.0,
        "unknown_accuracy": None,
        "known_accuracy": None,
    }
    if SplitMode(split_mode) == SplitMode.OPEN:
        result["known_accuracy"] = float(correct[known].mean()) if known.any() else None
        result["unknown_accuracy"] = float(correct[~known].mean()) if (~known).any() else None
    return result


def evaluate(
    net: TransDANet,
    params: ModelParams,
    dataset: Dataset,
    split_mode: SplitMode = SplitMode.CLOSED,
    threshold: float = 0.5,
    epoch: int = 0,
    losses: Optional[LossBreakdown] = None,
    pseudo_label_accuracy: Optional[float] = None,
    batch_size: int = DEFAULT_EVAL_BATCH,
) -> MetricsRecord:
    """Accuracy and attention overlap of ``params`` on a labeled eval set."""
    if len(dataset) == 0:
        raise ContractError("cannot evaluate on an empty set")
    preds = predict(net, params, dataset.images, batch_size)
    predicted = predicted_labels(preds.probs, split_mode, threshold)
    scores = classification_metrics(predicted, dataset.labels, net.num_classes, split_mode)
    overlap = float(np.clip(overlap_per_sample(preds.saliency, dataset.masks).mean(), 0.0, 1.0))
    return MetricsRecord(
        epoch=epoch,
        losses=losses,
        pseudo_label_accuracy=pseudo_label_accuracy,
        attention_overlap=overlap,
        **scores,
    )
