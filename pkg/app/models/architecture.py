"""Architecture configs for the feature extractor and classifier."""

from typing import List, Optional

from pydantic import BaseModel, Field, field_validator, model_validator


class BackboneConfig(BaseModel):
    """Small CNN backbone; the last conv block emits the h x w x d_hat feature map."""

    in_channels: int = Field(3, ge=1, description="Image channels")
    conv_channels: List[int] = Field(default_factory=lambda: [16, 32, 64], description="Channels per conv block")
    image_side: int = Field(32, ge=1, description="Square input side in pixels")

    @field_validator("conv_channels")
    @classmethod
    def validate_conv_channels(cls, v: List[int]) -> List[int]:
        if not v or any(c < 1 for c in v):
            raise ValueError("conv_channels must be a non-empty list of positive counts")
        return v

    @model_validator(mode="after")
    def validate_downsampling(self) -> "BackboneConfig":
        factor = 2 ** len(self.conv_channels)
        if self.image_side % factor:
            raise ValueError(
                f"image_side {self.image_side} must be divisible by 2^{len(self.conv_channels)}"
            )
        return self

    @property
    def grid_side(self) -> int:
        return self.image_side // 2 ** len(self.conv_channels)

    @property
    def feature_dim(self) -> int:
        """d_hat: channels of the final feature map."""
        return self.conv_channels[-1]


class TransformerConfig(BaseModel):
    num_layers: int = Field(2, ge=1, description="L")
    num_heads: int = Field(4, ge=1, description="m")
    embed_dim: int = Field(128, ge=1, description="d_bar")
    mlp_hidden: Optional[int] = Field(None, ge=1, description="Hidden width of the MLP block; 4*d_bar when unset")
    positional_embedding: bool = Field(False, description="Add a learnable position table to Z_0")

    @model_validator(mode="after")
    def validate_heads(self) -> "TransformerConfig":
        if self.embed_dim % self.num_heads:
            raise ValueError(
                f"embed_dim {self.embed_dim} is not divisible by num_heads {self.num_heads}"
            )
        if self.mlp_hidden is None:
            self.mlp_hidden = 4 * self.embed_dim
        return self

    @property
    def head_dim(self) -> int:
        return self.embed_dim // self.num_heads


class HeadConfig(BaseModel):
    bottleneck_dim: int = Field(256, ge=1, description="d: output width of the FC+BN bottleneck")
    num_classes: int = Field(..., ge=2, description="K")


class ModelManifest(BaseModel):
    """Everything needed to rebuild a network from a checkpoint."""

    backbone: BackboneConfig = Field(default_factory=BackboneConfig)
    transformer: TransformerConfig = Field(default_factory=TransformerConfig)
    head: HeadConfig
    use_transformer: bool = Field(True, description="False builds the CNN-only variant")

    @property
    def sequence_len(self) -> int:
        """u = h * w."""
        return self.backbone.grid_side ** 2
