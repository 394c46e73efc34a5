"""Checkpoint container: roundtrips, corruption detection, hashing."""

import struct

import numpy as np
import pytest

from hypermatch.checkpoint import (
    CheckpointError,
    config_hash,
    load_checkpoint,
    save_checkpoint,
)


def sample_tensors(rng):
    return {
        "weight": rng.normal(size=(3, 4)),
        "bias": rng.normal(size=4),
        "scalar_step_count": np.array(7.0),
        "moments/weight": rng.normal(size=(3, 4)),
    }


def test_roundtrip_bitwise(tmp_path):
    rng = np.random.default_rng(70)
    tensors = sample_tensors(rng)
    h = config_hash({"d": 16})
    path = tmp_path / "m.hmck"
    save_checkpoint(path, 42, h, tensors)
    step, got_hash, got = load_checkpoint(path)
    assert step == 42
    assert got_hash == h
    assert set(got) == set(tensors)
    for name, arr in tensors.items():
        assert got[name].shape == np.asarray(arr).shape
        assert np.array_equal(got[name], arr)


def test_roundtrip_preserves_zero_rank(tmp_path):
    path = tmp_path / "m.hmck"
    save_checkpoint(path, 0, b"\x00" * 32, {"s": np.array(3.5)})
    _, _, got = load_checkpoint(path)
    assert got["s"].shape == ()
    assert got["s"] == 3.5


def test_save_is_deterministic(tmp_path):
    rng = np.random.default_rng(71)
    tensors = sample_tensors(rng)
    a, b = tmp_path / "a.hmck", tmp_path / "b.hmck"
    save_checkpoint(a, 1, b"\x11" * 32, tensors)
    save_checkpoint(b, 1, b"\x11" * 32, tensors)
    assert a.read_bytes() == b.read_bytes()


def test_hash_length_enforced(tmp_path):
    with pytest.raises(ValueError):
        save_checkpoint(tmp_path / "m.hmck", 0, b"short", {})


def test_bad_magic(tmp_path):
    path = tmp_path / "m.hmck"
    save_checkpoint(path, 0, b"\x00" * 32, {})
    raw = bytearray(path.read_bytes())
    raw[:4] = b"XXXX"
    path.write_bytes(raw)
    with pytest.raises(CheckpointError, match="magic"):
        load_checkpoint(path)


def test_bad_version(tmp_path):
    path = tmp_path / "m.hmck"
    save_checkpoint(path, 0, b"\x00" * 32, {})
    raw = bytearray(path.read_bytes())
    struct.pack_into("<I", raw, 4, 9)
    path.write_bytes(raw)
    with pytest.raises(CheckpointError, match="version 9"):
        load_checkpoint(path)


def test_short_file(tmp_path):
    path = tmp_path / "m.hmck"
    path.write_bytes(b"HMCK")
    with pytest.raises(CheckpointError, match="header"):
        load_checkpoint(path)


def test_truncated_values(tmp_path):
    path = tmp_path / "m.hmck"
    save_checkpoint(path, 0, b"\x00" * 32, {"w": np.ones((2, 2))})
    raw = path.read_bytes()
    path.write_bytes(raw[:-8])
    with pytest.raises(CheckpointError, match="truncated"):
        load_checkpoint(path)


def test_truncated_record_header(tmp_path):
    path = tmp_path / "m.hmck"
    save_checkpoint(path, 0, b"\x00" * 32, {"w": np.ones(2)})
    raw = path.read_bytes()
    # keep the header plus two stray bytes of the first record
    path.write_bytes(raw[:struct.calcsize("<4sI32sQ") + 2])
    with pytest.raises(CheckpointError, match="truncated"):
        load_checkpoint(path)


def test_duplicate_tensor_rejected(tmp_path):
    path = tmp_path / "m.hmck"
    save_checkpoint(path, 0, b"\x00" * 32, {"w": np.ones(2)})
    raw = path.read_bytes()
    head = struct.calcsize("<4sI32sQ")
    # append a second copy of the same record
    path.write_bytes(raw + raw[head:])
    with pytest.raises(CheckpointError, match="duplicate"):
        load_checkpoint(path)


def test_config_hash_is_canonical():
    a = config_hash({"x": 1, "y": 2.0})
    b = config_hash({"y": 2.0, "x": 1})
    assert a == b
    assert len(a) == 32
    assert a != config_hash({"x": 1, "y": 2.5})


def test_empty_checkpoint_roundtrip(tmp_path):
    path = tmp_path / "m.hmck"
    save_checkpoint(path, 5, b"\xab" * 32, {})
    step, h, tensors = load_checkpoint(path)
    assert (step, h, tensors) == (5, b"\xab" * 32, {})
