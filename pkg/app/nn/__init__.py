from .params import FEATURE_EXTRACTOR_GROUPS, GROUP_ORDER, ModelParams, ParamGroup
from .ema import ema_update
from .backbone import ConvBackbone, reshape_to_sequence, sequence_to_map
from .transformer import MultiHeadSelfAttention, TransformerEncoder, TransformerLayer
from .network import ForwardOutput, TransDANet

__all__ = [
    "FEATURE_EXTRACTOR_GROUPS", "GROUP_ORDER", "ModelParams", "ParamGroup", "ema_update",
    "ConvBackbone", "reshape_to_sequence", "sequence_to_map",
    "MultiHeadSelfAttention", "TransformerEncoder", "TransformerLayer",
    "ForwardOutput", "TransDANet",
]
