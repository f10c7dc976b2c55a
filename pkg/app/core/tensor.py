"""Tensor, define-by-run tape and precision state of the autodiff engine."""

import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from app.utils.exceptions import ConfigError, ContractError, NumericDomainError


class OpKind(str, Enum):
    """Every primitive the tape can record."""
    MATMUL = "matmul"
    CONV2D = "conv2d"
    RELU = "relu"
    ADD = "add"
    MUL = "mul"
    SCALE = "scale"
    SOFTMAX = "softmax"
    LOG_SOFTMAX = "log_softmax"
    LOG = "log"
    EXP = "exp"
    XLOGX = "xlogx"
    SUM = "sum"
    MEAN = "mean"
    LAYER_NORM = "layer_norm"
    BATCH_NORM = "batch_norm"
    RESHAPE = "reshape"
    TRANSPOSE = "transpose"
    CONCAT = "concat"
    AVG_POOL2D = "avg_pool2d"
    AVERAGE_POOL_GLOBAL = "average_pool_global"
    GATHER_ROWS = "gather_rows"


PRECISIONS: Dict[str, type] = {"float32": np.float32, "float64": np.float64}

BackwardFn = Callable[[np.ndarray, Dict[str, Any]], Sequence[Optional[np.ndarray]]]


class _EngineState(threading.local):
    def __init__(self) -> None:
        self.dtype: type = np.float32
        self.grad_enabled: bool = True
        self.tape: List["TapeNode"] = []


_state = _EngineState()


def set_precision(precision: str) -> None:
    """Switch the working dtype: ``float64`` for oracle tests, ``float32`` for training."""
    if precision not in PRECISIONS:
        raise ConfigError(f"Unknown precision {precision!r}; expected one of {sorted(PRECISIONS)}")
    _state.dtype = PRECISIONS[precision]


def get_dtype() -> type:
    return _state.dtype


def get_precision() -> str:
    return "float64" if _state.dtype is np.float64 else "float32"


@contextmanager
def precision(name: str) -> Iterator[None]:
    previous = get_precision()
    set_precision(name)
    try:
        yield
    finally:
        set_precision(previous)


@contextmanager
def no_grad() -> Iterator[None]:
    """Run ops without recording them on the tape."""
    previous = _state.grad_enabled
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


def is_grad_enabled() -> bool:
    return _state.grad_enabled


class Tensor:
    """n-dimensional real array with an optional gradient slot."""

    __array_priority__ = 100

    def __init__(
        self,
        data: Any,
        requires_grad: bool = False,
        name: Optional[str] = None,
        dtype: Optional[type] = None,
    ):
        self.data: np.ndarray = np.asarray(data, dtype=dtype or _state.dtype)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False, name=self.name, dtype=self.data.dtype)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}{label}, requires_grad={self.requires_grad})"

    # Operator sugar; the ops themselves live in app.core.functional.
    def __add__(self, other: Any) -> "Tensor":
        from app.core import functional as F
        return F.add(self, other)

    __radd__ = __add__

    def __sub__(self, other: Any) -> "Tensor":
        from app.core import functional as F
        return F.add(self, F.scale(F.as_tensor(other), -1.0))

    def __rsub__(self, other: Any) -> "Tensor":
        from app.core import functional as F
        return F.add(F.scale(self, -1.0), other)

    def __neg__(self) -> "Tensor":
        from app.core import functional as F
        return F.scale(self, -1.0)

    def __mul__(self, other: Any) -> "Tensor":
        from app.core import functional as F
        if isinstance(other, (int, float)):
            return F.scale(self, float(other))
        return F.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other: Union[int, float]) -> "Tensor":
        from app.core import functional as F
        if not isinstance(other, (int, float)):
            raise ContractError("Tensor division is only defined for scalar divisors")
        return F.scale(self, 1.0 / float(other))

    def __matmul__(self, other: "Tensor") -> "Tensor":
        from app.core import functional as F
        return F.matmul(self, other)

    def reshape(self, *shape: int) -> "Tensor":
        from app.core import functional as F
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return F.reshape(self, shape)

    def transpose(self, *axes: int) -> "Tensor":
        from app.core import functional as F
        return F.transpose(self, axes or None)

    def sum(self, axis: Any = None, keepdims: bool = False) -> "Tensor":
        from app.core import functional as F
        return F.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis: Any = None, keepdims: bool = False) -> "Tensor":
        from app.core import functional as F
        return F.mean(self, axis=axis, keepdims=keepdims)


@dataclass
class TapeNode:
    """One recorded op: enough to push the output gradient back to the inputs."""
    op_kind: OpKind
    inputs: Tuple[Tensor, ...]
    output: Tensor
    backward_fn: BackwardFn
    saved_context: Dict[str, Any] = field(default_factory=dict)

    @property
    def input_ids(self) -> List[int]:
        return [id(t) for t in self.inputs]

    @property
    def output_id(self) -> int:
        return id(self.output)


def record(
    op_kind: OpKind,
    inputs: Sequence[Tensor],
    data: np.ndarray,
    backward_fn: BackwardFn,
    saved_context: Optional[Dict[str, Any]] = None,
) -> Tensor:
    """Wrap an op result and put it on the tape when any input needs a gradient."""
    if not np.all(np.isfinite(data)):
        raise NumericDomainError(f"{op_kind.value}: produced non-finite values")
    needs_grad = _state.grad_enabled and any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=needs_grad, dtype=data.dtype)
    if needs_grad:
        _state.tape.append(
            TapeNode(op_kind, tuple(inputs), out, backward_fn, saved_context or {})
        )
    return out


def tape_size() -> int:
    return len(_state.tape)


def clear_tape() -> None:
    _state.tape.clear()


def backward(loss: Tensor) -> None:
    """Reverse-mode sweep from a scalar loss; populates ``.grad`` and clears the tape."""
    if loss.ndim != 0:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not _state.tape:
        raise ContractError("backward called with an empty tape")
    if not loss.requires_grad:
        raise ContractError("loss does not depend on any tensor that requires grad")

    grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    pending: Dict[int, Tensor] = {id(loss): loss}
    try:
        for node in reversed(_state.tape):
            grad_out = grads.pop(node.output_id, None)
            if grad_out is None:
                continue
            pending.pop(node.output_id, None)
            node.output.grad = grad_out
            input_grads = node.backward_fn(grad_out, node.saved_context)
            for tensor, grad_in in zip(node.inputs, input_grads):
                if grad_in is None or not tensor.requires_grad:
                    continue
                key = id(tensor)
                grad_in = np.asarray(grad_in, dtype=tensor.data.dtype).reshape(tensor.shape)
                grads[key] = grads[key] + grad_in if key in grads else grad_in
                pending[key] = tensor

        # Whatever is left was never produced by a recorded op: leaves.
        for key, grad in grads.items():
            tensor = pending[key]
            tensor.grad = grad if tensor.grad is None else tensor.grad + grad
    finally:
        _state.tape.clear()


def as_array(value: Any) -> np.ndarray:
    return value.data if isinstance(value, Tensor) else np.asarray(value, dtype=_state.dtype)
