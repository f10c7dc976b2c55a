"""phi = f o g: backbone, optional transformer, FC+BN bottleneck and classifier."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from app.core import functional as F
from app.core.tensor import Tensor, as_array
from app.models.architecture import ModelManifest
from app.nn.backbone import ConvBackbone, reshape_to_sequence
from app.nn.layers import BatchNorm, Linear
from app.nn.params import ModelParams, ParamGroup
from app.nn.transformer import TransformerEncoder
from app.utils.exceptions import ContractError


@dataclass
class ForwardOutput:
    features: Tensor                          # B x d, post-BN bottleneck
    logits: Tensor                            # B x K
    attention_maps: Optional[np.ndarray]      # L x B x m x u x u, None without transformer
    feature_map: np.ndarray                   # B x h x w x d_hat, for saliency of CNN-only runs


class TransDANet:
    """Architecture object shared by teacher and student; weights come from ``ModelParams``."""

    def __init__(self, manifest: ModelManifest):
        self.manifest = manifest
        backbone_cfg = manifest.backbone
        self.backbone = ConvBackbone(backbone_cfg)
        pooled_dim = backbone_cfg.feature_dim
        self.encoder: Optional[TransformerEncoder] = None
        if manifest.use_transformer:
            self.encoder = TransformerEncoder(manifest.transformer, backbone_cfg.feature_dim,
                                              manifest.sequence_len)
            pooled_dim = manifest.transformer.embed_dim
        head = manifest.head
        self.bottleneck_fc = Linear("fc", ParamGroup.BOTTLENECK, pooled_dim, head.bottleneck_dim)
        self.bottleneck_bn = BatchNorm("bn", ParamGroup.BOTTLENECK, head.bottleneck_dim)
        self.classifier = Linear("fc", ParamGroup.CLASSIFIER, head.bottleneck_dim, head.num_classes)

    @property
    def num_classes(self) -> int:
        return self.manifest.head.num_classes

    def init_params(self, seed: int) -> ModelParams:
        rng = np.random.default_rng(seed)
        params = ModelParams()
        self.backbone.init_params(params, rng)
        if self.encoder is not None:
            self.encoder.init_params(params, rng)
        self.bottleneck_fc.init_params(params, rng)
        self.bottleneck_bn.init_params(params, rng)
        self.classifier.init_params(params, rng)
        return params

    def _check_initialized(self, params: ModelParams) -> None:
        if not params.has(ParamGroup.CLASSIFIER, "fc.weight") or not params.has(ParamGroup.BACKBONE, "conv0.weight"):
            raise ContractError("Model parameters are not initialized")

    def forward(self, params: ModelParams, images, training: bool = False) -> ForwardOutput:
        self._check_initialized(params)
        x = images if isinstance(images, Tensor) else Tensor(as_array(images))
        backbone_out = self.backbone(params, x, training)
        attention_maps = None
        if self.encoder is not None:
            encoded = self.encoder(params, reshape_to_sequence(backbone_out.feature_map))
            attention_maps = encoded.attention_maps
            pooled = F.mean(encoded.tokens, axis=1)
        else:
            pooled = F.average_pool_global(backbone_out.nchw)
        features = self.bottleneck_bn(params, self.bottleneck_fc(params, pooled), training)
        logits = self.classifier(params, features)
        return ForwardOutput(features=features, logits=logits, attention_maps=attention_maps,
                             feature_map=backbone_out.feature_map.data)

    def extract_features(self, params: ModelParams, images, training: bool = False) -> ForwardOutput:
        return self.forward(params, images, training)

    __call__ = forward
