"""Desk-scale CNN backbone: [conv3x3 -> BN -> ReLU -> 2x avg-pool] per block."""

from dataclasses import dataclass
from typing import List

import numpy as np

from app.core import functional as F
from app.core.tensor import Tensor
from app.models.architecture import BackboneConfig
from app.nn.base import Module
from app.nn.layers import BatchNorm, Conv2d
from app.nn.params import ModelParams, ParamGroup
from app.utils.exceptions import DimensionError


@dataclass
class BackboneOutput:
    feature_map: Tensor   # B x h x w x d_hat
    nchw: Tensor          # same values, B x d_hat x h x w


class ConvBackbone(Module):
    def __init__(self, config: BackboneConfig):
        super().__init__("backbone", ParamGroup.BACKBONE)
        self.config = config
        self.convs: List[Conv2d] = []
        self.norms: List[BatchNorm] = []
        in_ch = config.in_channels
        for i, out_ch in enumerate(config.conv_channels):
            self.convs.append(Conv2d(f"conv{i}", ParamGroup.BACKBONE, in_ch, out_ch, 3, 1, 1))
            self.norms.append(BatchNorm(f"bn{i}", ParamGroup.BACKBONE, out_ch))
            in_ch = out_ch

    def children(self) -> List[Module]:
        return [m for pair in zip(self.convs, self.norms) for m in pair]

    def init_params(self, params: ModelParams, rng: np.random.Generator) -> None:
        for module in self.children():
            module.init_params(params, rng)

    def __call__(self, params: ModelParams, images: Tensor, training: bool) -> BackboneOutput:
        cfg = self.config
        side = cfg.image_side
        if images.ndim != 4 or images.shape[1:] != (cfg.in_channels, side, side):
            raise DimensionError(
                "backbone_forward", images.shape, (-1, cfg.in_channels, side, side),
                reason="expected B x C x S x S images",
            )
        x = images
        for conv, norm in zip(self.convs, self.norms):
            x = F.avg_pool2d(F.relu(norm(params, conv(params, x), training)), 2)
        return BackboneOutput(feature_map=F.transpose(x, (0, 2, 3, 1)), nchw=x)


def reshape_to_sequence(feature_map: Tensor) -> Tensor:
    """B x h x w x d_hat -> B x u x d_hat, row i*w + j holding F[i, j, :]."""
    if feature_map.ndim != 4:
        raise DimensionError("reshape_to_sequence", feature_map.shape, reason="expected B x h x w x d")
    b, h, w, d = feature_map.shape
    return F.reshape(feature_map, (b, h * w, d))


def sequence_to_map(sequence: Tensor, h: int, w: int) -> Tensor:
    """Inverse of :func:`reshape_to_sequence`."""
    b, u, d = sequence.shape
    if u != h * w:
        raise DimensionError("sequence_to_map", sequence.shape, (b, h, w, d))
    return F.reshape(sequence, (b, h, w, d))
