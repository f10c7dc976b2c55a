"""Synthetic domain-shift images with exact object masks."""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.datasets.shapes import NUM_SHAPES, draw_mask
from app.models.data import DomainSpec
from app.utils.exceptions import ConfigError, ContractError
from app.utils.helpers import sample_rng, stable_id

UNKNOWN_LABEL = -1
TRAIN, EVAL = 0, 1
_CONTRAST_TRIES = 32


SOURCE_DOMAIN = DomainSpec(
    name="source",
    background_palette=[(0.90, 0.90, 0.86), (0.84, 0.87, 0.92), (0.93, 0.89, 0.80)],
    background_texture=False,
    texture_strength=0.0,
    object_palette=[(0.55, 0.18, 0.12), (0.60, 0.35, 0.08), (0.50, 0.12, 0.28)],
    color_jitter=0.05,
    noise_level=0.02,
    clutter_count=0,
    min_contrast=0.25,
)

# Objects stay darker than the background and the clutter in both domains.
TARGET_DOMAIN = DomainSpec(
    name="target",
    background_palette=[(0.62, 0.66, 0.70), (0.68, 0.64, 0.58), (0.60, 0.68, 0.62)],
    background_texture=True,
    texture_strength=0.12,
    object_palette=[(0.10, 0.22, 0.45), (0.08, 0.35, 0.38), (0.25, 0.15, 0.45)],
    color_jitter=0.05,
    noise_level=0.06,
    clutter_count=2,
    clutter_palette=[(0.50, 0.52, 0.55), (0.55, 0.50, 0.46)],
    min_contrast=0.25,
)

DEFAULT_DOMAINS: Dict[str, DomainSpec] = {"source": SOURCE_DOMAIN, "target": TARGET_DOMAIN}


@dataclass
class Sample:
    image: np.ndarray      # C x S x S float32 in [0, 1]
    label: int             # class index, or UNKNOWN_LABEL for open-set extras
    mask: np.ndarray       # S x S bool
    domain: str
    shape_id: int


@dataclass
class Dataset:
    """Column-wise storage of samples from one or more domains."""

    images: np.ndarray         # N x C x S x S float32
    labels: np.ndarray         # N int64
    masks: np.ndarray          # N x S x S uint8
    shape_ids: np.ndarray      # N int64
    domains: np.ndarray        # N uint8, index into domain_names
    partitions: np.ndarray     # N uint8, TRAIN or EVAL
    domain_names: List[str]
    num_classes: int

    def __post_init__(self) -> None:
        n = len(self.labels)
        for name in ("images", "masks", "shape_ids", "domains", "partitions"):
            if len(getattr(self, name)) != n:
                raise ContractError(f"dataset column '{name}' has {len(getattr(self, name))} rows, expected {n}")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def image_side(self) -> int:
        return int(self.images.shape[-1])

    @property
    def channels(self) -> int:
        return int(self.images.shape[1])

    @property
    def known_mask(self) -> np.ndarray:
        return self.labels != UNKNOWN_LABEL

    def select(self, rows: np.ndarray) -> "Dataset":
        return Dataset(
            images=self.images[rows], labels=self.labels[rows], masks=self.masks[rows],
            shape_ids=self.shape_ids[rows], domains=self.domains[rows],
            partitions=self.partitions[rows], domain_names=list(self.domain_names),
            num_classes=self.num_classes,
        )

    def subset(self, domain: Optional[str] = None, partition: Optional[int] = None) -> "Dataset":
        rows = np.ones(len(self), dtype=bool)
        if domain is not None:
            if domain not in self.domain_names:
                raise ConfigError(f"unknown domain '{domain}', have {self.domain_names}")
            rows &= self.domains == self.domain_names.index(domain)
        if partition is not None:
            rows &= self.partitions == partition
        return self.select(np.flatnonzero(rows))

    def class_histogram(self) -> np.ndarray:
        known = self.labels[self.known_mask]
        return np.bincount(known, minlength=self.num_classes)

    def sample(self, i: int) -> Sample:
        return Sample(image=self.images[i], label=int(self.labels[i]), mask=self.masks[i].astype(bool),
                      domain=self.domain_names[int(self.domains[i])], shape_id=int(self.shape_ids[i]))

    @classmethod
    def concat(cls, parts: Sequence["Dataset"]) -> "Dataset":
        if not parts:
            raise ContractError("cannot concatenate zero datasets")
        names: List[str] = []
        for part in parts:
            for name in part.domain_names:
                if name not in names:
                    names.append(name)
        domains = [np.array([names.index(p.domain_names[d]) for d in p.domains], dtype=np.uint8) for p in parts]
        return cls(
            images=np.concatenate([p.images for p in parts]),
            labels=np.concatenate([p.labels for p in parts]),
            masks=np.concatenate([p.masks for p in parts]),
            shape_ids=np.concatenate([p.shape_ids for p in parts]),
            domains=np.concatenate(domains),
            partitions=np.concatenate([p.partitions for p in parts]),
            domain_names=names,
            num_classes=max(p.num_classes for p in parts),
        )

    @classmethod
    def from_samples(cls, samples: Sequence[Sample], num_classes: int, partition: int = TRAIN) -> "Dataset":
        if not samples:
            raise ContractError("cannot build a dataset from zero samples")
        names: List[str] = []
        for s in samples:
            if s.domain not in names:
                names.append(s.domain)
        n = len(samples)
        return cls(
            images=np.stack([s.image for s in samples]).astype(np.float32),
            labels=np.array([s.label for s in samples], dtype=np.int64),
            masks=np.stack([s.mask for s in samples]).astype(np.uint8),
            shape_ids=np.array([s.shape_id for s in samples], dtype=np.int64),
            domains=np.array([names.index(s.domain) for s in samples], dtype=np.uint8),
            partitions=np.full(n, partition, dtype=np.uint8),
            domain_names=names,
            num_classes=num_classes,
        )


def _palette_draw(palette, jitter: float, rng: np.random.Generator) -> np.ndarray:
    base = np.asarray(palette[rng.integers(len(palette))], dtype=np.float64)
    return np.clip(base + rng.uniform(-jitter, jitter, size=3), 0.0, 1.0)


def _background(domain: DomainSpec, side: int, rng: np.random.Generator) -> np.ndarray:
    color = _palette_draw(domain.background_palette, domain.color_jitter, rng)
    canvas = np.broadcast_to(color[:, None, None], (3, side, side)).copy()
    if domain.background_texture and domain.texture_strength > 0:
        coords = np.arange(side)
        yy, xx = np.meshgrid(coords, coords, indexing="ij")
        period = int(rng.integers(3, 7))
        phase = int(rng.integers(period))
        if rng.random() < 0.5:
            pattern = ((xx + yy + phase) // period) % 2
        else:
            pattern = ((xx + phase) // period + (yy + phase) // period) % 2
        lift = domain.texture_strength * pattern.astype(np.float64)
        canvas = np.clip(canvas + lift[None] * (1.0 - canvas) * 0.5, 0.0, 1.0)
    return canvas


def _object_color(domain: DomainSpec, background: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    reference = background.mean(axis=(1, 2))
    best, best_gap = None, -1.0
    for _ in range(_CONTRAST_TRIES):
        color = _palette_draw(domain.object_palette, domain.color_jitter, rng)
        gap = float(np.mean(np.abs(color - reference)))
        if gap >= domain.min_contrast:
            return color
        if gap > best_gap:
            best, best_gap = color, gap
    return best


def _clutter(domain: DomainSpec, canvas: np.ndarray, mask: np.ndarray, rng: np.random.Generator) -> None:
    side = mask.shape[0]
    coords = np.arange(side) + 0.5
    xx, yy = np.meshgrid(coords, coords)
    for _ in range(domain.clutter_count):
        radius = rng.uniform(0.06, 0.12) * side
        cx, cy = rng.uniform(0, side, size=2)
        blob = ((xx - cx) ** 2 + (yy - cy) ** 2 <= radius ** 2) & ~mask
        color = _palette_draw(domain.clutter_palette or domain.background_palette, domain.color_jitter, rng)
        canvas[:, blob] = color[:, None]


def render_sample(
    domain: DomainSpec, shape_id: int, side: int, rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray]:
    """One C x S x S float32 image and its S x S boolean object mask."""
    mask = draw_mask(shape_id, side, rng)
    canvas = _background(domain, side, rng)
    color = _object_color(domain, canvas, rng)
    _clutter(domain, canvas, mask, rng)
    canvas[:, mask] = color[:, None]
    if domain.noise_level > 0:
        canvas = np.clip(canvas + rng.normal(0.0, domain.noise_level, size=canvas.shape), 0.0, 1.0)
    return canvas.astype(np.float32), mask


def generate(
    domain: DomainSpec,
    n: int,
    num_classes: int,
    seed: int,
    image_side: int = 32,
    shape_ids: Optional[Sequence[int]] = None,
    label_map: Optional[Dict[int, int]] = None,
    stream: int = 0,
) -> List[Sample]:
    """Draw ``n`` samples with a class-balanced label sequence.

    ``shape_ids`` defaults to ``range(num_classes)``; ``label_map`` maps a shape id
    to its class index (missing ids become UNKNOWN_LABEL). Sample ``i`` depends only
    on (seed, domain name, stream, i), so generation can be sharded by index.
    """
    if n <= 0:
        raise ContractError(f"number of samples must be positive, got {n}")
    ids = list(range(num_classes)) if shape_ids is None else list(shape_ids)
    if not ids or max(ids) >= NUM_SHAPES or min(ids) < 0:
        raise ConfigError(f"shape ids must lie in [0, {NUM_SHAPES}), got {ids}")
    mapping = {s: s for s in range(num_classes)} if label_map is None else label_map
    order_rng = np.random.default_rng([seed, stable_id(domain.name), stream])
    sequence = order_rng.permutation(np.arange(n) % len(ids))
    domain_stream = stable_id(domain.name) ^ stream
    samples = []
    for i, slot in enumerate(sequence):
        shape_id = ids[int(slot)]
        image, mask = render_sample(domain, shape_id, image_side, sample_rng(seed, domain_stream, i))
        samples.append(Sample(image=image, label=mapping.get(shape_id, UNKNOWN_LABEL), mask=mask,
                              domain=domain.name, shape_id=shape_id))
    return samples
