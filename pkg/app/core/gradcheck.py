"""Central finite-difference gradient checker."""

from dataclasses import dataclass, field
from typing import Callable, List, Sequence

import numpy as np

from app.core.tensor import Tensor, backward, clear_tape, no_grad


@dataclass
class GradCheckResult:
    max_relative_error: float
    per_input: List[float] = field(default_factory=list)
    tolerance: float = 1e-4

    @property
    def passed(self) -> bool:
        return self.max_relative_error <= self.tolerance


def numerical_gradient(fn: Callable[[], Tensor], tensor: Tensor, eps: float = 1e-5) -> np.ndarray:
    tensor.data = np.ascontiguousarray(tensor.data)
    flat = tensor.data.reshape(-1)
    grad = np.zeros_like(flat)
    with no_grad():
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + eps
            plus = fn().item()
            flat[i] = original - eps
            minus = fn().item()
            flat[i] = original
            grad[i] = (plus - minus) / (2 * eps)
    return grad.reshape(tensor.shape)


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-4) -> float:
    """Largest per-element |a - n| / max(|a|, |n|, floor)."""
    analytic, numeric = np.asarray(analytic, dtype=np.float64), np.asarray(numeric, dtype=np.float64)
    if analytic.size == 0:
        return 0.0
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / scale))


def check_gradients(
    fn: Callable[[], Tensor],
    inputs: Sequence[Tensor],
    eps: float = 1e-5,
    tolerance: float = 1e-4,
) -> GradCheckResult:
    """Compare tape gradients of the scalar ``fn()`` against central differences."""
    clear_tape()
    for t in inputs:
        t.grad = None
    backward(fn())
    analytic = [np.zeros(t.shape) if t.grad is None else t.grad.copy() for t in inputs]
    errors = [relative_error(a, numerical_gradient(fn, t, eps)) for a, t in zip(analytic, inputs)]
    return GradCheckResult(max(errors, default=0.0), errors, tolerance)
