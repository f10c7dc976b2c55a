from .attention import (
    activation_saliency, attention_overlap, overlap_per_sample, token_saliency, upsample_saliency,
)
from .metrics import Predictions, classification_metrics, evaluate, predict, predicted_labels

__all__ = [
    "activation_saliency", "attention_overlap", "overlap_per_sample", "token_saliency", "upsample_saliency",
    "Predictions", "classification_metrics", "evaluate", "predict", "predicted_labels",
]
