"""Source and target training objectives."""

import numpy as np

from app.core import functional as F
from app.core.tensor import Tensor, get_dtype
from app.models.training import LossConfig
from app.utils.exceptions import ContractError, DimensionError

SOFT_LABEL_ATOL = 1e-6


def _check_logits(op: str, logits: Tensor) -> int:
    if logits.ndim != 2 or logits.shape[0] < 1:
        raise DimensionError(op, logits.shape, reason="expected B x K logits with B >= 1")
    return logits.shape[1]


def one_hot(labels: np.ndarray, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise DimensionError("one_hot", labels.shape, reason="labels must be 1-D")
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ContractError(
            f"labels must lie in [0, {num_classes}), got range [{labels.min()}, {labels.max()}]"
        )
    encoded = np.zeros((labels.size, num_classes), dtype=get_dtype())
    encoded[np.arange(labels.size), labels.astype(np.int64)] = 1.0
    return encoded


def soft_cross_entropy(logits: Tensor, targets: np.ndarray) -> Tensor:
    """mean_i -sum_k targets[i, k] * log softmax(logits)[i, k]."""
    if targets.shape != logits.shape:
        raise DimensionError("soft_cross_entropy", logits.shape, targets.shape)
    log_probs = F.log_softmax(logits, axis=1)
    per_sample = F.sum(F.mul(Tensor(targets), log_probs), axis=1)
    return F.scale(F.mean(per_sample), -1.0)


def ce_smooth(logits: Tensor, labels: np.ndarray, smoothing: float) -> Tensor:
    """Label-smoothed cross-entropy used for source training."""
    k = _check_logits("ce_smooth", logits)
    if not 0.0 <= smoothing < 1.0:
        raise ContractError(f"smoothing must lie in [0, 1), got {smoothing}")
    if len(labels) != logits.shape[0]:
        raise DimensionError("ce_smooth", logits.shape, np.shape(labels))
    targets = (1.0 - smoothing) * one_hot(labels, k) + smoothing / k
    return soft_cross_entropy(logits, targets.astype(get_dtype()))


def im_loss(logits: Tensor) -> Tensor:
    """Mean per-sample entropy plus the negative entropy of the batch-mean prediction."""
    _check_logits("im_loss", logits)
    probs = F.softmax(logits, axis=1)
    log_probs = F.log_softmax(logits, axis=1)
    entropy = F.scale(F.mean(F.sum(F.mul(probs, log_probs), axis=1)), -1.0)
    marginal = F.mean(probs, axis=0)
    diversity = F.sum(F.xlogx(marginal))
    return F.add(entropy, diversity)


def sl_loss(student_logits: Tensor, hard_labels: np.ndarray) -> Tensor:
    """Plain cross-entropy against hard pseudo-labels."""
    k = _check_logits("sl_loss", student_logits)
    if len(hard_labels) != student_logits.shape[0]:
        raise DimensionError("sl_loss", student_logits.shape, np.shape(hard_labels))
    return soft_cross_entropy(student_logits, one_hot(hard_labels, k))


def kd_loss(student_logits: Tensor, soft_labels: np.ndarray) -> Tensor:
    """Cross-entropy of the student's log-softmax against teacher soft labels."""
    _check_logits("kd_loss", student_logits)
    soft = np.asarray(soft_labels, dtype=get_dtype())
    row_sums = soft.sum(axis=1) if soft.ndim == 2 else None
    if row_sums is None or np.any(np.abs(row_sums - 1.0) > SOFT_LABEL_ATOL) or np.any(soft < 0):
        raise ContractError("soft labels must be non-negative rows summing to 1")
    return soft_cross_entropy(student_logits, soft)


def total_target_loss(im: Tensor, sl: Tensor, kd: Tensor, cfg: LossConfig) -> Tensor:
    """L_tgt = L_im + alpha_sl * L_sl + beta_kd * L_kd."""
    return F.add(F.add(im, F.scale(sl, cfg.alpha_sl)), F.scale(kd, cfg.beta_kd))
