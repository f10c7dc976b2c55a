from .losses import ce_smooth, im_loss, kd_loss, one_hot, sl_loss, soft_cross_entropy, total_target_loss
from .pseudo import (
    Centroids, PseudoLabeler, PseudoLabels, assign_nearest, cosine_distances,
    initial_centroids, refine_once, soft_labels,
)

__all__ = [
    "ce_smooth", "im_loss", "kd_loss", "one_hot", "sl_loss", "soft_cross_entropy", "total_target_loss",
    "Centroids", "PseudoLabeler", "PseudoLabels", "assign_nearest", "cosine_distances",
    "initial_centroids", "refine_once", "soft_labels",
]
