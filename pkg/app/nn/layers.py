"""Linear, convolution and normalization layers."""

import numpy as np

from app.core import functional as F
from app.core.tensor import Tensor
from app.nn.base import Module
from app.nn.params import ModelParams, ParamGroup


def uniform_fan_in(rng: np.random.Generator, shape: tuple, fan_in: int, gain: float = 1.0) -> np.ndarray:
    """Zero-mean uniform init with bound gain * sqrt(1 / fan_in)."""
    bound = gain * np.sqrt(1.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Linear(Module):
    def __init__(self, name: str, group: ParamGroup, in_features: int, out_features: int, bias: bool = True):
        super().__init__(name, group)
        self.in_features = in_features
        self.out_features = out_features
        self.bias = bias

    def init_params(self, params: ModelParams, rng: np.random.Generator) -> None:
        self._add(params, "weight", uniform_fan_in(rng, (self.in_features, self.out_features), self.in_features))
        if self.bias:
            self._add(params, "bias", np.zeros(self.out_features))

    def __call__(self, params: ModelParams, x: Tensor) -> Tensor:
        bias = self.param(params, "bias") if self.bias else None
        return F.linear(x, self.param(params, "weight"), bias)


class Conv2d(Module):
    def __init__(self, name: str, group: ParamGroup, in_channels: int, out_channels: int,
                 kernel_size: int = 3, stride: int = 1, padding: int = 1):
        super().__init__(name, group)
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.padding = padding

    def init_params(self, params: ModelParams, rng: np.random.Generator) -> None:
        k = self.kernel_size
        fan_in = self.in_channels * k * k
        # He-uniform: sqrt(6 / fan_in), ReLU follows every conv
        self._add(params, "weight",
                  uniform_fan_in(rng, (self.out_channels, self.in_channels, k, k), fan_in, gain=np.sqrt(6.0)))
        self._add(params, "bias", np.zeros(self.out_channels))

    def __call__(self, params: ModelParams, x: Tensor) -> Tensor:
        return F.conv2d(x, self.param(params, "weight"), self.param(params, "bias"),
                        stride=self.stride, padding=self.padding)


class BatchNorm(Module):
    """BN over (B, D) or (B, C, H, W); running stats are non-trainable buffers."""

    def __init__(self, name: str, group: ParamGroup, num_features: int):
        super().__init__(name, group)
        self.num_features = num_features

    def init_params(self, params: ModelParams, rng: np.random.Generator) -> None:
        self._add(params, "gamma", np.ones(self.num_features))
        self._add(params, "beta", np.zeros(self.num_features))
        self._add(params, "running_mean", np.zeros(self.num_features), buffer=True)
        self._add(params, "running_var", np.ones(self.num_features), buffer=True)

    def __call__(self, params: ModelParams, x: Tensor, training: bool) -> Tensor:
        return F.batch_norm(
            x,
            self.param(params, "gamma"),
            self.param(params, "beta"),
            self.param(params, "running_mean"),
            self.param(params, "running_var"),
            training=training,
        )


class LayerNorm(Module):
    def __init__(self, name: str, group: ParamGroup, num_features: int, eps: float = 1e-5):
        super().__init__(name, group)
        self.num_features = num_features
        self.eps = eps

    def init_params(self, params: ModelParams, rng: np.random.Generator) -> None:
        self._add(params, "gamma", np.ones(self.num_features))
        self._add(params, "beta", np.zeros(self.num_features))

    def __call__(self, params: ModelParams, x: Tensor) -> Tensor:
        return F.layer_norm(x, self.param(params, "gamma"), self.param(params, "beta"), eps=self.eps)
