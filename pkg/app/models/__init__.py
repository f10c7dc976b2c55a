from .architecture import BackboneConfig, TransformerConfig, HeadConfig, ModelManifest
from .training import AdaptConfig, LossConfig, ExperimentConfig, MethodArm, SplitMode, DEFAULT_ARMS
from .data import DomainSpec, SplitSpec
from .metrics import LossBreakdown, MetricsRecord, SummaryRow

__all__ = [
    "BackboneConfig", "TransformerConfig", "HeadConfig", "ModelManifest",
    "AdaptConfig", "LossConfig", "ExperimentConfig", "MethodArm", "SplitMode", "DEFAULT_ARMS",
    "DomainSpec", "SplitSpec",
    "LossBreakdown", "MetricsRecord", "SummaryRow",
]
