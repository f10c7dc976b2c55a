"""Base class for every parameterized building block."""

from abc import ABC, abstractmethod
from typing import List

import numpy as np

from app.core.tensor import Tensor
from app.nn.params import ModelParams, ParamGroup


class Module(ABC):
    """A block that owns named tensors inside one parameter group.

    Modules hold no weights themselves: weights live in a :class:`ModelParams`
    passed to every call, so teacher and student share one architecture object.
    """

    def __init__(self, name: str, group: ParamGroup):
        self.name = name
        self.group = group

    @abstractmethod
    def init_params(self, params: ModelParams, rng: np.random.Generator) -> None:
        """Create this module's tensors inside ``params``."""

    def param(self, params: ModelParams, key: str) -> Tensor:
        return params.get(self.group, f"{self.name}.{key}")

    def _add(self, params: ModelParams, key: str, data: np.ndarray, buffer: bool = False) -> None:
        params.add(self.group, f"{self.name}.{key}", data, buffer=buffer)

    def children(self) -> List["Module"]:
        return []
