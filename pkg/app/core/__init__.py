from .tensor import (
    OpKind, Tensor, TapeNode, backward, clear_tape, get_dtype, get_precision,
    is_grad_enabled, no_grad, precision, set_precision, tape_size,
)
from .optim import SgdMomentumState, sgd_step
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "OpKind", "Tensor", "TapeNode", "backward", "clear_tape", "get_dtype", "get_precision",
    "is_grad_enabled", "no_grad", "precision", "set_precision", "tape_size",
    "SgdMomentumState", "sgd_step",
    "load_checkpoint", "save_checkpoint",
]
