"""Training, loss and experiment configuration."""

from enum import Enum
from typing import Dict, Optional

from pydantic import BaseModel, Field

from .architecture import BackboneConfig, TransformerConfig


class MethodArm(str, Enum):
    """Rows of the ablation table."""
    SOURCE_ONLY = "source_only"
    SOURCE_ONLY_TRANSFORMER = "source_only_transformer"
    BASELINE = "baseline"
    TRANSFORMER = "transformer"
    TRANSFORMER_EMA = "transformer_ema"
    TRANSFORMER_KD = "transformer_kd"

    @property
    def uses_transformer(self) -> bool:
        return self not in (MethodArm.SOURCE_ONLY, MethodArm.BASELINE)

    @property
    def adapts(self) -> bool:
        return self not in (MethodArm.SOURCE_ONLY, MethodArm.SOURCE_ONLY_TRANSFORMER)

    @property
    def label(self) -> str:
        return {
            MethodArm.SOURCE_ONLY: "Source Only",
            MethodArm.SOURCE_ONLY_TRANSFORMER: "Source Only + Transformer",
            MethodArm.BASELINE: "Baseline",
            MethodArm.TRANSFORMER: "+ Transformer",
            MethodArm.TRANSFORMER_EMA: "+ Transformer + EMA",
            MethodArm.TRANSFORMER_KD: "+ Transformer + KD",
        }[self]


DEFAULT_ARMS = [
    MethodArm.SOURCE_ONLY,
    MethodArm.BASELINE,
    MethodArm.TRANSFORMER,
    MethodArm.TRANSFORMER_EMA,
    MethodArm.TRANSFORMER_KD,
]


class SplitMode(str, Enum):
    CLOSED = "closed"
    PARTIAL = "partial"
    OPEN = "open"


class LossConfig(BaseModel):
    smoothing: float = Field(0.1, ge=0.0, lt=1.0, description="Label smoothing of the source loss")
    alpha_sl: float = Field(0.3, ge=0.0, description="Weight of the self-labeling loss")
    beta_kd: float = Field(1.0, ge=0.0, description="Weight of the distillation loss")


class AdaptConfig(BaseModel):
    """Every knob of source training and target adaptation."""

    lr_backbone_transformer: float = Field(1e-3, gt=0.0)
    lr_bottleneck_classifier: float = Field(1e-2, gt=0.0)
    momentum: float = Field(0.9, ge=0.0, lt=1.0)
    weight_decay: float = Field(1e-3, ge=0.0)
    batch_size: int = Field(32, ge=2, description="BN needs at least two samples per batch")
    source_epochs: int = Field(10, ge=1)
    target_epochs: int = Field(15, ge=1)
    ema_momentum: float = Field(0.99, ge=0.0, le=1.0)
    tau: float = Field(0.1, gt=0.0, description="Soft pseudo-label temperature")
    open_set_threshold: float = Field(0.5, ge=0.0, le=1.0)
    bottleneck_dim: int = Field(256, ge=1)
    dump_pseudo_labels: bool = Field(False)
    seed: int = Field(0)
    loss: LossConfig = Field(default_factory=LossConfig)
    backbone: BackboneConfig = Field(default_factory=BackboneConfig)
    transformer: TransformerConfig = Field(default_factory=TransformerConfig)

    @property
    def lr_per_group(self) -> Dict[str, float]:
        return {
            "backbone": self.lr_backbone_transformer,
            "transformer": self.lr_backbone_transformer,
            "bottleneck": self.lr_bottleneck_classifier,
            "classifier": self.lr_bottleneck_classifier,
        }

    def for_arm(self, arm: MethodArm) -> "AdaptConfig":
        """Derive the loss/teacher settings a given ablation row runs with."""
        loss = self.loss.model_copy()
        ema_momentum = self.ema_momentum
        if arm in (MethodArm.BASELINE, MethodArm.TRANSFORMER):
            loss.beta_kd = 0.0
            ema_momentum = 0.0
        elif arm == MethodArm.TRANSFORMER_EMA:
            loss.beta_kd = 0.0
        return self.model_copy(update={"loss": loss, "ema_momentum": ema_momentum})


class ExperimentConfig(BaseModel):
    dataset_path: Optional[str] = Field(None, description="Dataset file written by generate-data")
    split_mode: SplitMode = Field(SplitMode.CLOSED)
    method: MethodArm = Field(MethodArm.TRANSFORMER_KD)
    output_dir: str = Field("runs", description="Where metrics, checkpoints and reports go")
    adapt: AdaptConfig = Field(default_factory=AdaptConfig)
