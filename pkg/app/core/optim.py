"""SGD with momentum and weight decay over grouped parameters."""

from dataclasses import dataclass, field
from typing import Dict, Iterable, Mapping, Protocol, Tuple

import numpy as np

from app.core.tensor import Tensor
from app.utils.exceptions import ConfigError, ContractError


class GroupedParameters(Protocol):
    """Anything that can list its trainable tensors as (group, name, tensor)."""

    def trainable(self) -> Iterable[Tuple[str, str, Tensor]]:
        ...


@dataclass
class SgdMomentumState:
    lr_per_group: Dict[str, float]
    momentum: float = 0.9
    weight_decay: float = 1e-3
    velocity: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(
        cls,
        params: GroupedParameters,
        lr_per_group: Mapping[str, float],
        momentum: float = 0.9,
        weight_decay: float = 1e-3,
    ) -> "SgdMomentumState":
        state = cls(dict(lr_per_group), momentum, weight_decay)
        for group, name, tensor in params.trainable():
            if group not in state.lr_per_group:
                raise ConfigError(f"No learning rate configured for parameter group '{group}'")
            state.velocity[f"{group}.{name}"] = np.zeros_like(tensor.data)
        return state


def sgd_step(params: GroupedParameters, state: SgdMomentumState) -> None:
    """v <- momentum*v + grad + wd*param; param <- param - lr_group*v; grads zeroed."""
    entries = list(params.trainable())
    for group, name, tensor in entries:
        if tensor.grad is None:
            raise ContractError(f"Missing gradient for trainable parameter '{group}.{name}'")
        if group not in state.lr_per_group:
            raise ContractError(f"No learning rate for parameter group '{group}'")

    for group, name, tensor in entries:
        key = f"{group}.{name}"
        velocity = state.velocity.get(key)
        if velocity is None or velocity.shape != tensor.data.shape:
            velocity = np.zeros_like(tensor.data)
        velocity = state.momentum * velocity + tensor.grad + state.weight_decay * tensor.data
        tensor.data = (tensor.data - state.lr_per_group[group] * velocity).astype(tensor.data.dtype)
        state.velocity[key] = velocity.astype(tensor.data.dtype)
        tensor.grad = None
