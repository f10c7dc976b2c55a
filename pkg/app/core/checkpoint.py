"""Single-file tensor checkpoints.

Layout (all integers little-endian)::

    offset 0   magic   b"TDCK"
    offset 4   uint32  format version (1)
    offset 8   uint64  manifest length M
    offset 16  M bytes UTF-8 JSON manifest
    16 + M     float32 blob, tensors back to back

The manifest holds ``{"tensors": [{"name", "shape", "dtype", "offset", "nbytes"}],
"extra": {...}}``; ``offset`` is relative to the start of the blob.
"""

import json
import struct
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, ValidationError, field_validator

from app.utils.exceptions import DataFormatError
from app.utils.helpers import first_error

MAGIC = b"TDCK"
VERSION = 1
_HEADER = struct.Struct("<4sIQ")


def encode_checkpoint(tensors: Mapping[str, np.ndarray], extra: Mapping[str, Any]) -> bytes:
    entries = []
    chunks = []
    offset = 0
    for name, array in tensors.items():
        raw = np.ascontiguousarray(array, dtype="<f4").tobytes()
        entries.append({
            "name": name,
            "shape": list(np.shape(array)),
            "dtype": "float32",
            "offset": offset,
            "nbytes": len(raw),
        })
        chunks.append(raw)
        offset += len(raw)
    manifest = json.dumps({"tensors": entries, "extra": dict(extra)},
                          sort_keys=True, separators=(",", ":")).encode("utf-8")
    return _HEADER.pack(MAGIC, VERSION, len(manifest)) + manifest + b"".join(chunks)


class _TensorEntry(BaseModel):
    name: str
    shape: List[int]
    dtype: Literal["float32"]
    offset: int = Field(..., ge=0)
    nbytes: int = Field(..., ge=0)

    @field_validator("shape")
    @classmethod
    def validate_shape(cls, v: List[int]) -> List[int]:
        if any(dim < 0 for dim in v):
            raise ValueError(f"negative dimension in {v}")
        return v


class CheckpointManifest(BaseModel):
    tensors: List[_TensorEntry]
    extra: Dict[str, Any] = Field(default_factory=dict)


def decode_checkpoint(payload: bytes) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    if len(payload) < _HEADER.size:
        raise DataFormatError("Checkpoint header truncated", offset=0,
                              expected=_HEADER.size, actual=len(payload))
    magic, version, manifest_len = _HEADER.unpack_from(payload, 0)
    if magic != MAGIC:
        raise DataFormatError(f"Bad checkpoint magic {magic!r}", offset=0)
    if version != VERSION:
        raise DataFormatError(f"Unsupported checkpoint version {version}", offset=4)
    start = _HEADER.size
    if len(payload) < start + manifest_len:
        raise DataFormatError("Checkpoint manifest truncated", offset=start,
                              expected=manifest_len, actual=len(payload) - start)
    try:
        manifest = CheckpointManifest.model_validate_json(payload[start:start + manifest_len])
    except ValidationError as exc:
        raise DataFormatError(f"Corrupt checkpoint manifest: {first_error(exc)}", offset=start) from exc

    blob = payload[start + manifest_len:]
    expected_blob = sum(entry.nbytes for entry in manifest.tensors)
    if len(blob) != expected_blob:
        raise DataFormatError("Checkpoint blob length mismatch", offset=start + manifest_len,
                              expected=expected_blob, actual=len(blob))
    tensors: Dict[str, np.ndarray] = {}
    for entry in manifest.tensors:
        lo, hi = entry.offset, entry.offset + entry.nbytes
        array = np.frombuffer(blob[lo:hi], dtype="<f4")
        if array.size != int(np.prod(entry.shape, dtype=np.int64)):
            raise DataFormatError(f"Tensor '{entry.name}' size does not match its shape",
                                  offset=start + manifest_len + lo)
        tensors[entry.name] = array.reshape(entry.shape).copy()
    return tensors, manifest.extra


def save_checkpoint(path: Union[str, Path], tensors: Mapping[str, np.ndarray],
                    extra: Mapping[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(tensors, extra))
    return path


def load_checkpoint(path: Union[str, Path]) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"Checkpoint not found: {path}")
    return decode_checkpoint(path.read_bytes())
