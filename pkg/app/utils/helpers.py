"""Helper utility functions."""

import hashlib
from pathlib import Path
from typing import Iterator, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError


def hash_bytes(payload: bytes) -> str:
    """Create SHA256 hex digest of a byte payload."""
    return hashlib.sha256(payload).hexdigest()


def stable_id(text: str) -> int:
    """Process-independent 32-bit integer for a string (``hash()`` is salted)."""
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:4], "little")


def sample_rng(seed: int, stream: int, index: int) -> np.random.Generator:
    """Generator for one sample; depends only on (seed, stream, index)."""
    return np.random.default_rng([seed, stream, index])


def batch_slices(n: int, batch_size: int, drop_last: bool = False) -> Iterator[slice]:
    """Consecutive slices covering ``range(n)``."""
    for start in range(0, n, batch_size):
        stop = min(start + batch_size, n)
        if drop_last and stop - start < batch_size:
            return
        yield slice(start, stop)


def mean_std(values: Sequence[float]) -> Tuple[float, float]:
    """Mean and sample standard deviation (0 for a single value)."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        return float("nan"), float("nan")
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), std


def first_error(exc: ValidationError) -> str:
    """One-line summary of a pydantic error: location and message of the first problem."""
    error = exc.errors()[0]
    where = ".".join(str(part) for part in error["loc"]) or "<root>"
    return f"{where}: {error['msg']} ({exc.error_count()} error(s))"


def ensure_dir(path: Union[str, Path]) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path
