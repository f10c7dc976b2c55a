"""Differentiable primitives.

Each op computes its forward value with numpy, validates shapes, and records a
backward closure on the tape through :func:`app.core.tensor.record`.
"""

from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from app.core.tensor import OpKind, Tensor, get_dtype, record
from app.utils.exceptions import ContractError, DimensionError, NumericDomainError

Axis = Optional[Union[int, Tuple[int, ...]]]

BN_MOMENTUM = 0.1


def as_tensor(value: Any) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=get_dtype()))


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return np.asarray(grad).reshape(shape)


def _broadcast_shape(op: str, *tensors: Tensor) -> Tuple[int, ...]:
    try:
        return tuple(np.broadcast_shapes(*(t.shape for t in tensors)))
    except ValueError:
        raise DimensionError(op, *(t.shape for t in tensors), reason="not broadcastable") from None


def _normalize_axes(axis: Axis, ndim: int) -> Tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    normalized = []
    for a in axes:
        if not -ndim <= a < ndim:
            raise DimensionError("reduce", (ndim,), reason=f"axis {a} out of range")
        normalized.append(a % ndim)
    return tuple(sorted(normalized))


def _expand_reduced(grad: np.ndarray, shape: Tuple[int, ...], axes: Tuple[int, ...], keepdims: bool) -> np.ndarray:
    if not keepdims and axes:
        grad = np.expand_dims(grad, axes)
    return np.broadcast_to(grad, shape).copy()


# --- elementwise -----------------------------------------------------------

def add(a: Any, b: Any) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("add", a, b)

    def backward_fn(g: np.ndarray, ctx: Dict[str, Any]):
        return _unbroadcast(g, ctx["a_shape"]), _unbroadcast(g, ctx["b_shape"])

    return record(OpKind.ADD, (a, b), a.data + b.data, backward_fn,
                  {"a_shape": a.shape, "b_shape": b.shape})


def mul(a: Any, b: Any) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("mul", a, b)

    def backward_fn(g: np.ndarray, ctx: Dict[str, Any]):
        return (_unbroadcast(g * ctx["b"], ctx["a"].shape),
                _unbroadcast(g * ctx["a"], ctx["b"].shape))

    return record(OpKind.MUL, (a, b), a.data * b.data, backward_fn, {"a": a.data, "b": b.data})


def scale(x: Tensor, factor: float) -> Tensor:
    x = as_tensor(x)
    factor = float(factor)

    def backward_fn(g: np.ndarray, ctx: Dict[str, Any]):
        return (g * ctx["factor"],)

    return record(OpKind.SCALE, (x,), x.data * factor, backward_fn, {"factor": factor})


def relu(x: Tensor) -> Tensor:
    def backward_fn(g: np.ndarray, ctx: Dict[str, Any]):
        return (g * ctx["mask"],)

    return record(OpKind.RELU, (x,), np.maximum(x.data, 0), backward_fn, {"mask": x.data > 0})


def exp(x: Tensor) -> Tensor:
    out = np.exp(x.data)

    def backward_fn(g: np.ndarray, ctx: Dict[str, Any]):
        return (g * ctx["out"],)

    return record(OpKind.EXP, (x,), out, backward_fn, {"out": out})


def log(x: Tensor) -> Tensor:
    if np.any(x.data <= 0):
        raise NumericDomainError(
            f"log: input has non-positive values (min={float(np.min(x.data))})"
        )

    def backward_fn(g: np.ndarray, ctx: Dict[str, Any]):
        return (g / ctx["x"],)

    return record(OpKind.LOG, (x,), np.log(x.data), backward_fn, {"x": x.data})


def xlogx(x: Tensor) -> Tensor:
    """``x * log(x)`` with the entropy convention 0 * log 0 = 0."""
    if np.any(x.data < 0):
        raise NumericDomainError(f"xlogx: input has negative values (min={float(np.min(x.data))})")
    positive = x.data > 0
    safe_log = np.log(np.where(positive, x.data, 1))

    def backward_fn(g: np.ndarray, ctx: Dict[str, Any]):
        return (g * np.where(ctx["positive"], ctx["log"] + 1, 0),)

    return record(OpKind.XLOGX, (x,), np.where(positive, x.data * safe_log, 0), backward_fn,
                  {"positive": positive, "log": safe_log})


# --- reductions and normalizations -------------------------------------------

def sum(x: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    axes = _normalize_axes(axis, x.ndim)

    def backward_fn(g: np.ndarray, ctx: Dict[str, Any]):
        return (_expand_reduced(g, ctx["shape"], ctx["axes"], ctx["keepdims"]),)

    return record(OpKind.SUM, (x,), np.sum(x.data, axis=axes, keepdims=keepdims), backward_fn,
                  {"shape": x.shape, "axes": axes, "keepdims": keepdims})


def mean(x: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:
    axes = _normalize_axes(axis, x.ndim)
    count = int(np.prod([x.shape[a] for a in axes])) if axes else 1
    if count == 0:
        raise DimensionError("mean", x.shape, reason="empty reduction")

    def backward_fn(g: np.ndarray, ctx: Dict[str, Any]):
        return (_expand_reduced(g, ctx["shape"], ctx["axes"], ctx["keepdims"]) / ctx["count"],)

    return record(OpKind.MEAN, (x,), np.mean(x.data, axis=axes, keepdims=keepdims), backward_fn,
                  {"shape": x.shape, "axes": axes, "keepdims": keepdims, "count": count})


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - np.max(x.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / np.sum(e, axis=axis, keepdims=True)

    def backward_fn(g: np.ndarray, ctx: Dict[str, Any]):
        s = ctx["out"]
        return (s * (g - np.sum(g * s, axis=ctx["axis"], keepdims=True)),)

    return record(OpKind.SOFTMAX, (x,), out, backward_fn, {"out": out, "axis": axis})


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - np.max(x.data, axis=axis, keepdims=True)
    out = shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))

    def backward_fn(g: np.ndarray, ctx: Dict[str, Any]):
        probs = np.exp(ctx["out"])
        return (g - probs * np.sum(g, axis=ctx["axis"], keepdims=True),)

    return record(OpKind.LOG_SOFTMAX, (x,), out, backward_fn, {"out": out, "axis": axis})


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then apply the per-feature affine map."""
    features = x.shape[-1]
    if gamma.shape != (features,) or beta.shape != (features,):
        raise DimensionError("layer_norm", x.shape, gamma.shape, beta.shape)
    mu = np.mean(x.data, axis=-1, keepdims=True)
    var = np.var(x.data, axis=-1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * rstd
    out = xhat * gamma.data + beta.data

    def backward_fn(g: np.ndarray, ctx: Dict[str, Any]):
        xh, rs, gm = ctx["xhat"], ctx["rstd"], ctx["gamma"]
        n = xh.shape[-1]
        gxhat = g * gm
        gx = rs / n * (n * gxhat - np.sum(gxhat, axis=-1, keepdims=True)
                       - xh * np.sum(gxhat * xh, axis=-1, keepdims=True))
        lead = tuple(range(g.ndim - 1))
        return gx, np.sum(g * xh, axis=lead), np.sum(g, axis=lead)

    return record(OpKind.LAYER_NORM, (x, gamma, beta), out, backward_fn,
                  {"xhat": xhat, "rstd": rstd, "gamma": gamma.data})


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: Tensor,
    running_var: Tensor,
    training: bool,
    momentum: float = BN_MOMENTUM,
    eps: float = 1e-5,
) -> Tensor:
    """Batch normalization over (B, D) or (B, C, H, W) inputs.

    In training mode batch statistics are used and the running buffers are
    updated in place (unbiased variance); in eval mode the buffers are read only.
    """
    if x.ndim == 2:
        axes: Tuple[int, ...] = (0,)
        param_shape: Tuple[int, ...] = (1, x.shape[1])
    elif x.ndim == 4:
        axes = (0, 2, 3)
        param_shape = (1, x.shape[1], 1, 1)
    else:
        raise DimensionError("batch_norm", x.shape, reason="expected 2-D or 4-D input")
    channels = x.shape[1]
    for t in (gamma, beta, running_mean, running_var):
        if t.shape != (channels,):
            raise DimensionError("batch_norm", x.shape, t.shape)

    g_data = gamma.data.reshape(param_shape)
    b_data = beta.data.reshape(param_shape)
    if training:
        count = int(np.prod([x.shape[a] for a in axes]))
        if count < 2:
            raise ContractError("batch_norm in training mode needs more than one value per channel")
        mu = np.mean(x.data, axis=axes, keepdims=True)
        var = np.var(x.data, axis=axes, keepdims=True)
        running_mean.data = ((1 - momentum) * running_mean.data
                             + momentum * mu.reshape(-1)).astype(running_mean.data.dtype)
        running_var.data = ((1 - momentum) * running_var.data
                            + momentum * var.reshape(-1) * count / (count - 1)).astype(running_var.data.dtype)
    else:
        mu = running_mean.data.reshape(param_shape)
        var = running_var.data.reshape(param_shape)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * rstd
    out = xhat * g_data + b_data

    def backward_fn(g: np.ndarray, ctx: Dict[str, Any]):
        xh, rs, ax = ctx["xhat"], ctx["rstd"], ctx["axes"]
        gxhat = g * ctx["gamma"]
        if ctx["training"]:
            n = ctx["count"]
            gx = rs / n * (n * gxhat - np.sum(gxhat, axis=ax, keepdims=True)
                           - xh * np.sum(gxhat * xh, axis=ax, keepdims=True))
        else:
            gx = gxhat * rs
        return gx, np.sum(g * xh, axis=ax), np.sum(g, axis=ax), None, None

    ctx = {"xhat": xhat, "rstd": rstd, "gamma": g_data, "axes": axes, "training": training,
           "count": int(np.prod([x.shape[a] for a in axes]))}
    return record(OpKind.BATCH_NORM, (x, gamma, beta, running_mean, running_var), out,
                  backward_fn, ctx)


# --- linear algebra ------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError("matmul", a.shape, b.shape)
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise DimensionError("matmul", a.shape, b.shape, reason="batch dims") from None

    def backward_fn(g: np.ndarray, ctx: Dict[str, Any]):
        a_data, b_data = ctx["a"], ctx["b"]
        ga = np.matmul(g, np.swapaxes(b_data, -1, -2))
        gb = np.matmul(np.swapaxes(a_data, -1, -2), g)
        return _unbroadcast(ga, a_data.shape), _unbroadcast(gb, b_data.shape)

    return record(OpKind.MATMUL, (a, b), np.matmul(a.data, b.data), backward_fn,
                  {"a": a.data, "b": b.data})


def _im2col(xp: np.ndarray, kh: int, kw: int, stride: int) -> Tuple[np.ndarray, int, int]:
    windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    batch, channels, out_h, out_w = windows.shape[:4]
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(batch * out_h * out_w, channels * kh * kw)
    return cols, out_h, out_w


def conv2d(
    x: Tensor,
    weight: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
    padding: int = 0,
) -> Tensor:
    """2-D cross-correlation on NCHW input via im2col."""
    if x.ndim != 4 or weight.ndim != 4 or x.shape[1] != weight.shape[1]:
        raise DimensionError("conv2d", x.shape, weight.shape)
    out_channels, _, kh, kw = weight.shape
    if bias is not None and bias.shape != (out_channels,):
        raise DimensionError("conv2d", weight.shape, bias.shape, reason="bias")
    if stride < 1 or padding < 0:
        raise ContractError(f"conv2d: invalid stride={stride} padding={padding}")
    height, width = x.shape[2] + 2 * padding, x.shape[3] + 2 * padding
    if height < kh or width < kw:
        raise DimensionError("conv2d", x.shape, weight.shape, reason="kernel larger than input")

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    cols, out_h, out_w = _im2col(xp, kh, kw, stride)
    w_flat = weight.data.reshape(out_channels, -1)
    out = cols @ w_flat.T
    if bias is not None:
        out = out + bias.data
    batch = x.shape[0]
    out = np.ascontiguousarray(out.reshape(batch, out_h, out_w, out_channels).transpose(0, 3, 1, 2))

    def backward_fn(g: np.ndarray, ctx: Dict[str, Any]):
        g_flat = g.transpose(0, 2, 3, 1).reshape(-1, out_channels)
        grad_w = (g_flat.T @ ctx["cols"]).reshape(ctx["w_shape"])
        dcols = (g_flat @ ctx["w_flat"]).reshape(batch, out_h, out_w, -1, kh, kw)
        dxp = np.zeros(ctx["xp_shape"], dtype=g.dtype)
        s = ctx["stride"]
        for i in range(kh):
            for j in range(kw):
                dxp[:, :, i:i + s * out_h:s, j:j + s * out_w:s] += dcols[..., i, j].transpose(0, 3, 1, 2)
        p = ctx["padding"]
        grad_x = dxp[:, :, p:dxp.shape[2] - p, p:dxp.shape[3] - p]
        grads = [grad_x, grad_w]
        if ctx["has_bias"]:
            grads.append(g_flat.sum(axis=0))
        return grads

    inputs = (x, weight) if bias is None else (x, weight, bias)
    ctx = {"cols": cols, "w_flat": w_flat, "w_shape": weight.shape, "xp_shape": xp.shape,
           "stride": stride, "padding": padding, "has_bias": bias is not None}
    return record(OpKind.CONV2D, inputs, out, backward_fn, ctx)


# --- shape ops -------------------------------------------------------------------

def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        out = x.data.reshape(tuple(shape))
    except ValueError:
        raise DimensionError("reshape", x.shape, tuple(shape)) from None

    def backward_fn(g: np.ndarray, ctx: Dict[str, Any]):
        return (g.reshape(ctx["shape"]),)

    return record(OpKind.RESHAPE, (x,), out, backward_fn, {"shape": x.shape})


def transpose(x: Tensor, axes: Optional[Sequence[int]] = None) -> Tensor:
    axes = tuple(range(x.ndim))[::-1] if axes is None else tuple(axes)
    if sorted(a % x.ndim for a in axes) != list(range(x.ndim)) or len(axes) != x.ndim:
        raise DimensionError("transpose", x.shape, reason=f"invalid permutation {axes}")

    def backward_fn(g: np.ndarray, ctx: Dict[str, Any]):
        return (np.transpose(g, ctx["inverse"]),)

    return record(OpKind.TRANSPOSE, (x,), np.transpose(x.data, axes), backward_fn,
                  {"inverse": tuple(np.argsort([a % x.ndim for a in axes]))})


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ContractError("concat needs at least one tensor")
    first = tensors[0]
    axis = axis % first.ndim
    for t in tensors[1:]:
        if t.ndim != first.ndim or any(
            t.shape[d] != first.shape[d] for d in range(first.ndim) if d != axis
        ):
            raise DimensionError("concat", *(t.shape for t in tensors))
    sizes = [t.shape[axis] for t in tensors]

    def backward_fn(g: np.ndarray, ctx: Dict[str, Any]):
        return np.split(g, np.cumsum(ctx["sizes"])[:-1], axis=ctx["axis"])

    return record(OpKind.CONCAT, tuple(tensors), np.concatenate([t.data for t in tensors], axis=axis),
                  backward_fn, {"sizes": sizes, "axis": axis})


def gather_rows(x: Tensor, indices: Any) -> Tensor:
    """Select rows of ``x`` along axis 0 (an embedding lookup)."""
    idx = np.asarray(indices)
    if not np.issubdtype(idx.dtype, np.integer):
        raise ContractError(f"gather_rows: indices must be integers, got {idx.dtype}")
    if idx.size and (idx.min() < 0 or idx.max() >= x.shape[0]):
        raise DimensionError("gather_rows", x.shape, idx.shape, reason="index out of range")

    def backward_fn(g: np.ndarray, ctx: Dict[str, Any]):
        grad = np.zeros(ctx["shape"], dtype=g.dtype)
        np.add.at(grad, ctx["idx"], g)
        return (grad,)

    return record(OpKind.GATHER_ROWS, (x,), x.data[idx], backward_fn, {"idx": idx, "shape": x.shape})


def average_pool_global(x: Tensor) -> Tensor:
    """Mean over the spatial axes of an NCHW map: (B, C, H, W) -> (B, C)."""
    if x.ndim != 4:
        raise DimensionError("average_pool_global", x.shape, reason="expected NCHW")

    def backward_fn(g: np.ndarray, ctx: Dict[str, Any]):
        b, c, h, w = ctx["shape"]
        return (np.broadcast_to(g[:, :, None, None], ctx["shape"]) / (h * w),)

    return record(OpKind.AVERAGE_POOL_GLOBAL, (x,), x.data.mean(axis=(2, 3)), backward_fn,
                  {"shape": x.shape})


def avg_pool2d(x: Tensor, kernel: int = 2) -> Tensor:
    if x.ndim != 4 or x.shape[2] % kernel or x.shape[3] % kernel:
        raise DimensionError("avg_pool2d", x.shape, reason=f"spatial size not divisible by {kernel}")
    b, c, h, w = x.shape
    out = x.data.reshape(b, c, h // kernel, kernel, w // kernel, kernel).mean(axis=(3, 5))

    def backward_fn(g: np.ndarray, ctx: Dict[str, Any]):
        k = ctx["kernel"]
        return (np.repeat(np.repeat(g, k, axis=2), k, axis=3) / (k * k),)

    return record(OpKind.AVG_POOL2D, (x,), out, backward_fn, {"kernel": kernel})


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """``x @ weight + bias`` with weight stored as (in, out)."""
    out = matmul(x, weight)
    return add(out, bias) if bias is not None else out
