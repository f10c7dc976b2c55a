"""Closed, partial and open-set splits of the synthetic benchmark."""

import math
from dataclasses import dataclass, field
from typing import Dict, Tuple

from app.datasets.generator import EVAL, TRAIN, Dataset, DEFAULT_DOMAINS, generate
from app.datasets.shapes import NUM_SHAPES
from app.models.data import DomainSpec, SplitSpec
from app.models.training import SplitMode
from app.utils.exceptions import ConfigError

# share of the source classes the partial-set target keeps (25 of 65)
PARTIAL_RATIO = 25 / 65
MIN_CLASSES_RESTRICTED = 4


@dataclass
class Benchmark:
    source: Dataset
    target: Dataset
    split: SplitSpec
    seed: int
    domains: Dict[str, DomainSpec] = field(default_factory=lambda: dict(DEFAULT_DOMAINS))

    @property
    def num_classes(self) -> int:
        return self.split.num_classes


def max_classes(mode: SplitMode) -> int:
    """Largest K whose split fits in the shape vocabulary."""
    if SplitMode(mode) != SplitMode.OPEN:
        return NUM_SHAPES
    return max(k for k in range(1, NUM_SHAPES + 1) if k + math.ceil(k / 3) <= NUM_SHAPES)


def split_spec(mode: SplitMode, num_classes: int) -> SplitSpec:
    """Class sets for ``mode``; partial keeps ceil(K*25/65) classes, open adds ceil(K/3)."""
    try:
        mode = SplitMode(mode)
    except ValueError:
        raise ConfigError(f"invalid split mode {mode!r}; expected one of {[m.value for m in SplitMode]}") from None
    if num_classes < 2:
        raise ConfigError(f"need at least 2 classes, got {num_classes}")
    if mode != SplitMode.CLOSED and num_classes < MIN_CLASSES_RESTRICTED:
        raise ConfigError(f"{mode.value} split needs at least {MIN_CLASSES_RESTRICTED} classes, got {num_classes}")
    classes = list(range(num_classes))
    if mode == SplitMode.CLOSED:
        shared, source_only, unknown = classes, [], []
    elif mode == SplitMode.PARTIAL:
        kept = math.ceil(num_classes * PARTIAL_RATIO)
        shared, source_only, unknown = classes[:kept], classes[kept:], []
    else:
        extra = math.ceil(num_classes / 3)
        shared, source_only = classes, []
        unknown = list(range(num_classes, num_classes + extra))
    if max(shared + source_only + unknown) >= NUM_SHAPES:
        raise ConfigError(
            f"{mode.value} split with {num_classes} classes needs more than the {NUM_SHAPES} available shapes; "
            f"use at most {max_classes(mode)} classes"
        )
    return SplitSpec(mode=mode, num_classes=num_classes, shared_classes=shared,
                     source_only_classes=source_only, target_unknown_classes=unknown)


def _domain_dataset(domain: DomainSpec, spec: SplitSpec, shape_ids, per_domain: int,
                    eval_per_domain: int, seed: int, image_side: int) -> Dataset:
    label_map = {c: c for c in range(spec.num_classes)}
    parts = []
    for partition, count in ((TRAIN, per_domain), (EVAL, eval_per_domain)):
        samples = generate(domain, count, spec.num_classes, seed, image_side=image_side,
                           shape_ids=shape_ids, label_map=label_map, stream=partition)
        parts.append(Dataset.from_samples(samples, spec.num_classes, partition=partition))
    return Dataset.concat(parts)


def make_split(
    mode: SplitMode,
    num_classes: int,
    seed: int,
    per_domain: int = 2000,
    eval_per_domain: int = 500,
    image_side: int = 32,
    source_domain: DomainSpec = DEFAULT_DOMAINS["source"],
    target_domain: DomainSpec = DEFAULT_DOMAINS["target"],
) -> Tuple[Dataset, Dataset, SplitSpec]:
    """Source and target datasets (train + eval partitions each) for one split."""
    spec = split_spec(mode, num_classes)
    if not source_domain.differs_from(target_domain):
        raise ConfigError("source and target domains are identical; there is no shift")
    source = _domain_dataset(source_domain, spec, spec.source_classes, per_domain,
                             eval_per_domain, seed, image_side)
    target_ids = spec.target_classes + list(spec.target_unknown_classes)
    target = _domain_dataset(target_domain, spec, target_ids, per_domain,
                             eval_per_domain, seed, image_side)
    return source, target, spec


def make_benchmark(mode: SplitMode, num_classes: int, seed: int, **kwargs) -> Benchmark:
    source, target, spec = make_split(mode, num_classes, seed, **kwargs)
    domains = {
        "source": kwargs.get("source_domain", DEFAULT_DOMAINS["source"]),
        "target": kwargs.get("target_domain", DEFAULT_DOMAINS["target"]),
    }
    return Benchmark(source=source, target=target, split=spec, seed=seed, domains=domains)
