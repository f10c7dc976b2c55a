"""Single-file benchmark storage.

Layout (integers little-endian)::

    offset 0   magic   b"TDDS"
    offset 4   uint32  format version (1)
    offset 8   uint64  manifest length M
    offset 16  M bytes UTF-8 JSON manifest
    16 + M     blob: per role (source, target) float32 images, uint8 masks,
               int32 labels, int32 shape ids, uint8 domain and partition tags

The manifest lists every section with its offset and byte count relative to the
blob, plus counts, K, S, C, the split, the domain specs, the seed and the
SHA-256 of the blob, verified on load.
"""

import json
import struct
from pathlib import Path
from typing import Any, Dict, List, Literal, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from app.datasets.generator import Dataset
from app.datasets.splits import Benchmark
from app.models.data import DomainSpec, SplitSpec
from app.utils.exceptions import ContractError, DataFormatError
from app.utils.helpers import first_error, hash_bytes

MAGIC = b"TDDS"
VERSION = 1
_HEADER = struct.Struct("<4sIQ")
ROLES = ("source", "target")

# column -> on-disk little-endian dtype
_COLUMNS: List[Tuple[str, str]] = [
    ("images", "<f4"),
    ("masks", "|u1"),
    ("labels", "<i4"),
    ("shape_ids", "<i4"),
    ("domains", "|u1"),
    ("partitions", "|u1"),
]
_IN_MEMORY = {"images": np.float32, "masks": np.uint8, "labels": np.int64, "shape_ids": np.int64,
              "domains": np.uint8, "partitions": np.uint8}
_SECTION_NAMES = {f"{role}.{column}" for role in ROLES for column, _ in _COLUMNS}


def encode_benchmark(benchmark: Benchmark) -> bytes:
    sections, chunks = [], []
    offset = 0
    parts: Dict[str, Any] = {}
    for role in ROLES:
        dataset: Dataset = getattr(benchmark, role)
        parts[role] = {"count": len(dataset), "domain_names": dataset.domain_names}
        for column, dtype in _COLUMNS:
            array = np.ascontiguousarray(getattr(dataset, column), dtype=dtype)
            raw = array.tobytes()
            sections.append({"name": f"{role}.{column}", "dtype": dtype, "shape": list(array.shape),
                             "offset": offset, "nbytes": len(raw)})
            chunks.append(raw)
            offset += len(raw)
    blob = b"".join(chunks)
    manifest = {
        "seed": benchmark.seed,
        "num_classes": benchmark.num_classes,
        "image_side": benchmark.source.image_side,
        "channels": benchmark.source.channels,
        "split": benchmark.split.model_dump(mode="json"),
        "domains": {role: spec.model_dump(mode="json") for role, spec in benchmark.domains.items()},
        "parts": parts,
        "sections": sections,
        "sha256": hash_bytes(blob),
    }
    encoded = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return _HEADER.pack(MAGIC, VERSION, len(encoded)) + encoded + blob


class _Section(BaseModel):
    name: str
    dtype: Literal["<f4", "|u1", "<i4"]
    shape: List[int]
    offset: int = Field(..., ge=0)
    nbytes: int = Field(..., ge=0)

    @field_validator("name")
    @classmethod
    def validate_name(cls, v: str) -> str:
        if v not in _SECTION_NAMES:
            raise ValueError(f"unknown section '{v}'")
        return v


class _Part(BaseModel):
    count: int = Field(..., ge=0)
    domain_names: List[str]


class DatasetManifest(BaseModel):
    """JSON manifest of a dataset file; validated before any blob is read."""

    seed: int
    num_classes: int = Field(..., ge=2)
    image_side: int = Field(..., ge=1)
    channels: int = Field(..., ge=1)
    split: SplitSpec
    domains: Dict[str, DomainSpec]
    parts: Dict[str, _Part]
    sections: List[_Section]
    sha256: str

    @model_validator(mode="after")
    def validate_complete(self) -> "DatasetManifest":
        missing = _SECTION_NAMES - {s.name for s in self.sections}
        if missing:
            raise ValueError(f"missing sections {sorted(missing)}")
        if set(ROLES) - set(self.parts):
            raise ValueError(f"parts must cover {list(ROLES)}")
        return self


def decode_benchmark(payload: bytes) -> Benchmark:
    if len(payload) < _HEADER.size:
        raise DataFormatError("Dataset header truncated", offset=0, expected=_HEADER.size, actual=len(payload))
    magic, version, manifest_len = _HEADER.unpack_from(payload, 0)
    if magic != MAGIC:
        raise DataFormatError(f"Bad dataset magic {magic!r}", offset=0)
    if version != VERSION:
        raise DataFormatError(f"Unsupported dataset version {version}", offset=4)
    start = _HEADER.size
    if len(payload) < start + manifest_len:
        raise DataFormatError("Dataset manifest truncated", offset=start,
                              expected=manifest_len, actual=len(payload) - start)
    try:
        manifest = DatasetManifest.model_validate_json(payload[start:start + manifest_len])
    except ValidationError as exc:
        raise DataFormatError(f"Corrupt dataset manifest: {first_error(exc)}", offset=start) from exc

    blob_start = start + manifest_len
    blob = payload[blob_start:]
    expected = sum(section.nbytes for section in manifest.sections)
    if len(blob) != expected:
        raise DataFormatError("Dataset blob length mismatch", offset=blob_start,
                              expected=expected, actual=len(blob))
    if hash_bytes(blob) != manifest.sha256:
        raise DataFormatError("Dataset blob hash does not match the manifest", offset=blob_start)

    columns: Dict[str, np.ndarray] = {}
    for section in manifest.sections:
        lo, hi = section.offset, section.offset + section.nbytes
        array = np.frombuffer(blob[lo:hi], dtype=section.dtype)
        if array.size != int(np.prod(section.shape, dtype=np.int64)):
            raise DataFormatError(f"Section '{section.name}' size does not match its shape",
                                  offset=blob_start + lo)
        column = section.name.split(".", 1)[1]
        columns[section.name] = array.reshape(section.shape).astype(_IN_MEMORY[column])

    datasets = {}
    for role in ROLES:
        try:
            datasets[role] = Dataset(
                **{column: columns[f"{role}.{column}"] for column, _ in _COLUMNS},
                domain_names=list(manifest.parts[role].domain_names),
                num_classes=manifest.num_classes,
            )
        except ContractError as exc:
            raise DataFormatError(f"Inconsistent '{role}' columns: {exc.message}", offset=blob_start) from exc
    return Benchmark(
        source=datasets["source"],
        target=datasets["target"],
        split=manifest.split,
        seed=manifest.seed,
        domains=dict(manifest.domains),
    )


def save_dataset(path: Union[str, Path], benchmark: Benchmark) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_benchmark(benchmark))
    return path


def load_dataset(path: Union[str, Path]) -> Benchmark:
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"Dataset file not found: {path}")
    return decode_benchmark(path.read_bytes())
