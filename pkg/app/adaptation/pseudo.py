"""Teacher-driven pseudo-labels: weighted centroids, nearest-centroid labels, soft labels."""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy.spatial.distance import cdist
from scipy.special import softmax

from app.config.logging import LoggerMixin
from app.utils.exceptions import ConfigError, ContractError, DimensionError

EMPTY_WEIGHT = 1e-12


@dataclass
class Centroids:
    mu: np.ndarray                 # K x d
    counts: np.ndarray             # K, samples per class (round 1 only)
    round: int = 0
    empty: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    def __post_init__(self) -> None:
        if self.round not in (0, 1):
            raise ContractError(f"centroid round must be 0 or 1, got {self.round}")
        if self.empty.size == 0:
            self.empty = np.zeros(self.mu.shape[0], dtype=bool)

    @property
    def num_classes(self) -> int:
        return self.mu.shape[0]


@dataclass
class PseudoLabels:
    hard: np.ndarray               # N, int
    soft: np.ndarray               # N x K
    temperature: float
    initial_hard: Optional[np.ndarray] = None
    centroids: Optional[Centroids] = None

    def accuracy(self, labels: np.ndarray, known_mask: Optional[np.ndarray] = None) -> float:
        """Agreement with ground truth, optionally restricted to known-class samples."""
        mask = np.ones(len(labels), dtype=bool) if known_mask is None else known_mask
        if not mask.any():
            return 0.0
        return float(np.mean(self.hard[mask] == labels[mask]))

    def to_frame(self, sample_ids: Optional[Sequence[int]] = None) -> pd.DataFrame:
        ids = np.arange(len(self.hard)) if sample_ids is None else np.asarray(sample_ids)
        frame = pd.DataFrame({"sample_id": ids, "hard": self.hard})
        for k in range(self.soft.shape[1]):
            frame[f"soft_{k}"] = self.soft[:, k]
        return frame

    def dump_csv(self, path: Union[str, Path], sample_ids: Optional[Sequence[int]] = None) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame(sample_ids).to_csv(path, index=False, float_format="%.8g")
        return path


def _as_features(features: np.ndarray) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] < 1:
        raise DimensionError("pseudo_labels", features.shape, reason="expected N x d features, N >= 1")
    return features


def initial_centroids(features: np.ndarray, probs: np.ndarray) -> Centroids:
    """mu_k = sum_i p_ik f_i / sum_i p_ik; classes with no weight are flagged empty."""
    features = _as_features(features)
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2 or probs.shape[0] != features.shape[0]:
        raise DimensionError("initial_centroids", features.shape, probs.shape)
    weight = probs.sum(axis=0)
    empty = weight < EMPTY_WEIGHT
    mu = probs.T @ features
    mu[~empty] /= weight[~empty, None]
    mu[empty] = 0.0
    return Centroids(mu=mu, counts=np.zeros(probs.shape[1], dtype=np.int64), round=0, empty=empty)


def cosine_distances(features: np.ndarray, centroids: Centroids) -> np.ndarray:
    """N x K matrix of 1 - cos(f_i, mu_k); empty classes are at infinite distance."""
    features = _as_features(features)
    if features.shape[1] != centroids.mu.shape[1]:
        raise DimensionError("cosine_distances", features.shape, centroids.mu.shape)
    if np.any(np.linalg.norm(features, axis=1) == 0.0):
        raise ContractError("cosine distance is undefined for a zero-norm feature vector")
    usable = ~centroids.empty & (np.linalg.norm(centroids.mu, axis=1) > 0.0)
    if not usable.any():
        raise ContractError("no usable centroid: every class is empty")
    dist = np.full((features.shape[0], centroids.num_classes), np.inf)
    dist[:, usable] = cdist(features, centroids.mu[usable], "cosine")
    return dist


def assign_nearest(features: np.ndarray, centroids: Centroids) -> np.ndarray:
    """Nearest centroid under cosine distance; argmin picks the smallest k on ties."""
    return np.argmin(cosine_distances(features, centroids), axis=1).astype(np.int64)


def refine_once(features: np.ndarray, hard: np.ndarray, previous: Centroids):
    """One k-means round: class means of the current labels, then reassignment.

    A class with no samples keeps the centroid of ``previous``.
    """
    features = _as_features(features)
    hard = np.asarray(hard, dtype=np.int64)
    k = previous.num_classes
    if hard.shape != (features.shape[0],):
        raise DimensionError("refine_once", features.shape, hard.shape)
    if hard.size and (hard.min() < 0 or hard.max() >= k):
        raise ContractError(f"hard labels must lie in [0, {k})")
    counts = np.bincount(hard, minlength=k)
    mu = previous.mu.copy()
    for cls in np.flatnonzero(counts):
        mu[cls] = features[hard == cls].mean(axis=0)
    refined = Centroids(mu=mu, counts=counts, round=1, empty=previous.empty.copy())
    return refined, assign_nearest(features, refined)


def soft_labels(features: np.ndarray, centroids: Centroids, tau: float) -> np.ndarray:
    """softmax_k(cos(f_i, mu_k) / tau); empty classes get probability 0."""
    if tau <= 0:
        raise ConfigError(f"temperature must be positive, got {tau}")
    similarity = 1.0 - cosine_distances(features, centroids)
    return softmax(similarity / tau, axis=1)


class PseudoLabeler(LoggerMixin):
    """Runs the full labeling pipeline on one teacher pass over the target set."""

    def __init__(self, tau: float):
        if tau <= 0:
            raise ConfigError(f"temperature must be positive, got {tau}")
        self.tau = tau

    def generate(self, features: np.ndarray, probs: np.ndarray) -> PseudoLabels:
        round0 = initial_centroids(features, probs)
        if round0.empty.any():
            self.log_warning("Empty classes during pseudo-labeling",
                             classes=np.flatnonzero(round0.empty).tolist())
        initial = assign_nearest(features, round0)
        refined, hard = refine_once(features, initial, round0)
        soft = soft_labels(features, refined, self.tau)
        return PseudoLabels(hard=hard, soft=soft, temperature=self.tau,
                            initial_hard=initial, centroids=refined)
