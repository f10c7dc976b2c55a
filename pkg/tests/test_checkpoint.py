"""Test the single-file checkpoint codec."""

import json
import struct

import numpy as np
import pytest

from app.core.checkpoint import decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint
from app.utils.exceptions import DataFormatError


@pytest.fixture
def tensors(rng):
    return {"a": rng.normal(size=(2, 3)).astype(np.float32), "b": np.arange(4, dtype=np.float32)}


def test_round_trip_is_bitwise(tmp_path, tensors):
    path = save_checkpoint(tmp_path / "model.ckpt", tensors, {"stage": "source"})
    loaded, extra = load_checkpoint(path)
    assert extra == {"stage": "source"}
    for name, array in tensors.items():
        assert loaded[name].tobytes() == array.tobytes()


def test_header_layout(tensors):
    payload = encode_checkpoint(tensors, {})
    magic, version, manifest_len = struct.unpack_from("<4sIQ", payload, 0)
    assert magic == b"TDCK" and version == 1
    assert len(payload) == 16 + manifest_len + sum(a.nbytes for a in tensors.values())


def test_encoding_is_deterministic(tensors):
    assert encode_checkpoint(tensors, {"x": 1}) == encode_checkpoint(dict(tensors), {"x": 1})


def test_truncated_blob_reports_byte_counts(tensors):
    payload = encode_checkpoint(tensors, {})
    with pytest.raises(DataFormatError) as info:
        decode_checkpoint(payload[:-4])
    assert info.value.expected == 40 and info.value.actual == 36
    assert "offset" in str(info.value)


def test_bad_magic(tensors):
    payload = bytearray(encode_checkpoint(tensors, {}))
    payload[:4] = b"XXXX"
    with pytest.raises(DataFormatError, match="magic"):
        decode_checkpoint(bytes(payload))


def test_missing_file(tmp_path):
    with pytest.raises(DataFormatError):
        load_checkpoint(tmp_path / "absent.ckpt")


def _with_manifest(payload, edit):
    _, version, length = struct.unpack_from("<4sIQ", payload, 0)
    manifest = json.loads(payload[16:16 + length])
    edit(manifest)
    encoded = json.dumps(manifest).encode("utf-8")
    return struct.pack("<4sIQ", b"TDCK", version, len(encoded)) + encoded + payload[16 + length:]


@pytest.mark.parametrize("edit", [
    lambda m: m.pop("tensors"),
    lambda m: m["tensors"][0].pop("offset"),
    lambda m: m["tensors"][0].update(dtype="float16"),
    lambda m: m["tensors"][1].update(shape=[-4]),
    lambda m: m.update(extra=[1, 2]),
], ids=["no-tensors", "no-offset", "bad-dtype", "negative-dim", "extra-not-a-mapping"])
def test_invalid_manifest_fields_are_format_errors(tensors, edit):
    payload = _with_manifest(encode_checkpoint(tensors, {"stage": "source"}), edit)
    with pytest.raises(DataFormatError) as info:
        decode_checkpoint(payload)
    assert info.value.offset == 16
    assert info.value.exit_code == 2
