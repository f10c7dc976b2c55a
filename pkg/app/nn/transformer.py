"""Transformer encoder injected after the last convolutional block."""

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from app.core import functional as F
from app.core.tensor import Tensor
from app.models.architecture import TransformerConfig
from app.nn.base import Module
from app.nn.layers import LayerNorm, Linear, uniform_fan_in
from app.nn.params import ModelParams, ParamGroup
from app.utils.exceptions import ConfigError, DimensionError

GROUP = ParamGroup.TRANSFORMER


class AttentionHead(Module):
    """Scaled dot-product self-attention with its own Q/K/V projections."""

    def __init__(self, name: str, embed_dim: int, head_dim: int):
        super().__init__(name, GROUP)
        self.embed_dim = embed_dim
        self.head_dim = head_dim

    def init_params(self, params: ModelParams, rng: np.random.Generator) -> None:
        for key in ("w_q", "w_k", "w_v"):
            self._add(params, key, uniform_fan_in(rng, (self.embed_dim, self.head_dim), self.embed_dim))

    def __call__(self, params: ModelParams, h: Tensor) -> Tuple[Tensor, Tensor]:
        q = F.matmul(h, self.param(params, "w_q"))
        k = F.matmul(h, self.param(params, "w_k"))
        v = F.matmul(h, self.param(params, "w_v"))
        scores = F.scale(F.matmul(q, F.transpose(k, (0, 2, 1))), 1.0 / np.sqrt(self.head_dim))
        weights = F.softmax(scores, axis=-1)
        return F.matmul(weights, v), weights


class MultiHeadSelfAttention(Module):
    """MSA(Z) = Z + concat(AH_1(LN(Z)), ..., AH_m(LN(Z))) W."""

    def __init__(self, name: str, config: TransformerConfig):
        super().__init__(name, GROUP)
        if config.embed_dim % config.num_heads:
            raise ConfigError(
                f"embed_dim {config.embed_dim} is not divisible by num_heads {config.num_heads}"
            )
        self.config = config
        self.norm = LayerNorm(f"{name}.ln", GROUP, config.embed_dim)
        self.heads = [AttentionHead(f"{name}.head{j}", config.embed_dim, config.head_dim)
                      for j in range(config.num_heads)]
        self.proj = Linear(f"{name}.proj", GROUP, config.num_heads * config.head_dim,
                           config.embed_dim, bias=False)

    def children(self) -> List[Module]:
        return [self.norm, *self.heads, self.proj]

    def init_params(self, params: ModelParams, rng: np.random.Generator) -> None:
        for module in self.children():
            module.init_params(params, rng)

    def __call__(self, params: ModelParams, z: Tensor) -> Tuple[Tensor, np.ndarray]:
        if z.ndim != 3 or z.shape[-1] != self.config.embed_dim:
            raise DimensionError("msa_layer", z.shape, reason=f"expected B x u x {self.config.embed_dim}")
        h = self.norm(params, z)
        outputs, maps = [], []
        for head in self.heads:
            out, weights = head(params, h)
            outputs.append(out)
            maps.append(weights.data)
        mixed = self.proj(params, F.concat(outputs, axis=-1))
        # B x m x u x u
        return F.add(z, mixed), np.stack(maps, axis=1)


class MLPBlock(Module):
    def __init__(self, name: str, embed_dim: int, hidden: int):
        super().__init__(name, GROUP)
        self.fc1 = Linear(f"{name}.fc1", GROUP, embed_dim, hidden)
        self.fc2 = Linear(f"{name}.fc2", GROUP, hidden, embed_dim)

    def children(self) -> List[Module]:
        return [self.fc1, self.fc2]

    def init_params(self, params: ModelParams, rng: np.random.Generator) -> None:
        for module in self.children():
            module.init_params(params, rng)

    def __call__(self, params: ModelParams, x: Tensor) -> Tensor:
        return self.fc2(params, F.relu(self.fc1(params, x)))


class TransformerLayer(Module):
    """Z_l = MLP(LN(MSA(Z_{l-1}))) + MSA(Z_{l-1})."""

    def __init__(self, name: str, config: TransformerConfig):
        super().__init__(name, GROUP)
        self.msa = MultiHeadSelfAttention(f"{name}.msa", config)
        self.norm = LayerNorm(f"{name}.ln", GROUP, config.embed_dim)
        self.mlp = MLPBlock(f"{name}.mlp", config.embed_dim, config.mlp_hidden or 4 * config.embed_dim)

    def children(self) -> List[Module]:
        return [self.msa, self.norm, self.mlp]

    def init_params(self, params: ModelParams, rng: np.random.Generator) -> None:
        for module in self.children():
            module.init_params(params, rng)

    def __call__(self, params: ModelParams, z: Tensor) -> Tuple[Tensor, np.ndarray]:
        attended, maps = self.msa(params, z)
        return F.add(self.mlp(params, self.norm(params, attended)), attended), maps


@dataclass
class EncoderOutput:
    tokens: Tensor                    # B x u x d_bar
    attention_maps: np.ndarray        # L x B x m x u x u


class TransformerEncoder(Module):
    """Patch embedding projection d_hat -> d_bar followed by L transformer layers."""

    def __init__(self, config: TransformerConfig, input_dim: int, sequence_len: int):
        super().__init__("encoder", GROUP)
        self.config = config
        self.sequence_len = sequence_len
        self.embed = Linear("embed", GROUP, input_dim, config.embed_dim)
        self.layers = [TransformerLayer(f"layer{l}", config) for l in range(config.num_layers)]

    def children(self) -> List[Module]:
        return [self.embed, *self.layers]

    def init_params(self, params: ModelParams, rng: np.random.Generator) -> None:
        for module in self.children():
            module.init_params(params, rng)
        if self.config.positional_embedding:
            params.add(GROUP, "pos_embed", rng.normal(0.0, 0.02, (self.sequence_len, self.config.embed_dim)))

    def __call__(self, params: ModelParams, sequence: Tensor) -> EncoderOutput:
        if sequence.ndim != 3 or sequence.shape[1] != self.sequence_len:
            raise DimensionError("transformer", sequence.shape,
                                 reason=f"expected sequence length {self.sequence_len}")
        z = self.embed(params, sequence)
        if self.config.positional_embedding:
            positions = F.gather_rows(params.get(GROUP, "pos_embed"), np.arange(self.sequence_len))
            z = F.add(z, positions)
        maps = []
        for layer in self.layers:
            z, layer_maps = layer(params, z)
            maps.append(layer_maps)
        return EncoderOutput(tokens=z, attention_maps=np.stack(maps, axis=0))
