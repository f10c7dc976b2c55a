"""Named parameter collections partitioned into the four model groups."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, Mapping, Optional, Set, Tuple

import numpy as np

from app.core.tensor import Tensor, get_dtype
from app.utils.exceptions import ContractError, ManifestError


class ParamGroup(str, Enum):
    BACKBONE = "backbone"
    TRANSFORMER = "transformer"
    BOTTLENECK = "bottleneck"
    CLASSIFIER = "classifier"


GROUP_ORDER = [ParamGroup.BACKBONE, ParamGroup.TRANSFORMER, ParamGroup.BOTTLENECK, ParamGroup.CLASSIFIER]
FEATURE_EXTRACTOR_GROUPS = [ParamGroup.BACKBONE, ParamGroup.TRANSFORMER, ParamGroup.BOTTLENECK]


@dataclass
class ModelParams:
    """Trainable tensors and BN running-stat buffers, keyed by group then name."""

    groups: Dict[ParamGroup, Dict[str, Tensor]] = field(
        default_factory=lambda: {g: {} for g in GROUP_ORDER})
    buffers: Dict[ParamGroup, Dict[str, Tensor]] = field(
        default_factory=lambda: {g: {} for g in GROUP_ORDER})
    frozen: Set[ParamGroup] = field(default_factory=set)

    def add(self, group: ParamGroup, name: str, data: np.ndarray, buffer: bool = False) -> Tensor:
        if name in self.groups[group] or name in self.buffers[group]:
            raise ContractError(f"Duplicate parameter '{group.value}.{name}'")
        tensor = Tensor(data, requires_grad=not buffer and group not in self.frozen,
                        name=f"{group.value}.{name}")
        (self.buffers if buffer else self.groups)[group][name] = tensor
        return tensor

    def get(self, group: ParamGroup, name: str) -> Tensor:
        if name in self.groups[group]:
            return self.groups[group][name]
        if name in self.buffers[group]:
            return self.buffers[group][name]
        raise ContractError(f"Parameter '{group.value}.{name}' is not initialized")

    def has(self, group: ParamGroup, name: str) -> bool:
        return name in self.groups[group] or name in self.buffers[group]

    def trainable(self) -> Iterator[Tuple[str, str, Tensor]]:
        for group in GROUP_ORDER:
            if group in self.frozen:
                continue
            for name, tensor in self.groups[group].items():
                yield group.value, name, tensor

    def named_tensors(self, include_buffers: bool = True) -> Iterator[Tuple[str, Tensor]]:
        for group in GROUP_ORDER:
            for name, tensor in self.groups[group].items():
                yield f"{group.value}.{name}", tensor
            if include_buffers:
                for name, tensor in self.buffers[group].items():
                    yield f"{group.value}.{name}", tensor

    def group_tensors(self, group: ParamGroup, include_buffers: bool = True) -> Iterator[Tuple[str, Tensor]]:
        yield from self.groups[group].items()
        if include_buffers:
            yield from self.buffers[group].items()

    def freeze(self, group: ParamGroup) -> None:
        self.frozen.add(group)
        for tensor in self.groups[group].values():
            tensor.requires_grad = False
            tensor.grad = None

    def zero_grad(self) -> None:
        for _, tensor in self.named_tensors():
            tensor.grad = None

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: tensor.data.copy() for name, tensor in self.named_tensors()}

    def load_state_dict(self, state: Mapping[str, np.ndarray]) -> None:
        expected = {name: tensor for name, tensor in self.named_tensors()}
        missing = sorted(set(expected) - set(state))
        unexpected = sorted(set(state) - set(expected))
        if missing or unexpected:
            raise ManifestError(
                f"Checkpoint does not match the model: missing={missing[:5]} unexpected={unexpected[:5]}",
                {"missing": missing, "unexpected": unexpected},
            )
        for name, tensor in expected.items():
            if tuple(state[name].shape) != tensor.shape:
                raise ManifestError(
                    f"Shape mismatch for '{name}': checkpoint {tuple(state[name].shape)} vs model {tensor.shape}"
                )
            tensor.data = np.asarray(state[name], dtype=get_dtype()).copy()

    def clone(self, requires_grad: Optional[bool] = None) -> "ModelParams":
        """Deep copy; ``requires_grad=False`` yields a stop-gradient copy."""
        copy = ModelParams(frozen=set(self.frozen))
        for group in GROUP_ORDER:
            for name, tensor in self.groups[group].items():
                flag = tensor.requires_grad if requires_grad is None else requires_grad
                copy.groups[group][name] = Tensor(tensor.data.copy(), requires_grad=flag,
                                                  name=tensor.name, dtype=tensor.data.dtype)
            for name, tensor in self.buffers[group].items():
                copy.buffers[group][name] = Tensor(tensor.data.copy(), requires_grad=False,
                                                   name=tensor.name, dtype=tensor.data.dtype)
        return copy
