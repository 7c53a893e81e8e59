#!/usr/bin/env python3

import struct
from collections import OrderedDict

import numpy as np
import pytest

from adgan.checkpoint import (
    MAGIC,
    Checkpoint,
    checkpoint_load,
    checkpoint_save,
    decode_checkpoint,
    encode_checkpoint,
    tensors_equal,
)
from adgan.errors import (
    CheckpointChecksumError,
    CheckpointFormatError,
    CheckpointTruncatedError,
    CheckpointVersionError,
)
from adgan.train import Trainer, restore_bundle


@pytest.fixture
def ckpt():
    rng = np.random.default_rng(0)
    tensors = OrderedDict([
        ("G/w", rng.standard_normal((2, 3, 3, 3))),
        ("G/b", np.array([np.pi, -0.0])),
        ("opt/G/w", np.abs(rng.standard_normal((2, 3, 3, 3)))),
        ("opt/G/b", np.zeros(2)),
        ("D/scalar", np.array(1.5)),
    ])
    header = {"config": {"seed": 1}, "counters": {"iteration": 4}, "rng": {"state": 9}}
    return Checkpoint(header=header, tensors=tensors)


def test_round_trip_is_bit_exact(ckpt):
    back = decode_checkpoint(encode_checkpoint(ckpt))
    assert back.header == ckpt.header
    assert tensors_equal(back.tensors, ckpt.tensors)
    assert list(back.params()) == ["G/w", "G/b", "D/scalar"]
    assert list(back.optimizer_state()) == ["G/w", "G/b"]
    assert back.counters() == {"iteration": 4}


def test_float32_values_come_back_exactly(ckpt):
    x = np.random.default_rng(1).standard_normal(7).astype(np.float32)
    ckpt.tensors["E/w"] = x
    back = decode_checkpoint(encode_checkpoint(ckpt))
    np.testing.assert_array_equal(back.tensors["E/w"].astype(np.float32), x)


def test_layout_starts_with_magic_and_version(ckpt):
    data = encode_checkpoint(ckpt)
    assert data[:4] == MAGIC
    assert struct.unpack("<I", data[4:8])[0] == 1


def test_flipped_byte_fails_checksum(ckpt):
    data = bytearray(encode_checkpoint(ckpt))
    data[-8] ^= 0xFF
    with pytest.raises(CheckpointChecksumError) as info:
        decode_checkpoint(bytes(data))
    assert info.value.code == 12


def _length_field_offsets(data):
    header_len = struct.unpack("<I", data[8:12])[0]
    first_name_len = 12 + header_len + 4
    return [8, 9, 10, first_name_len, first_name_len + 1, 12 + header_len]


def test_damaged_length_fields_fail_checksum_not_truncation(ckpt):
    clean = encode_checkpoint(ckpt)
    for offset in _length_field_offsets(clean) + [14, len(clean) - 20]:
        data = bytearray(clean)
        data[offset] ^= 0xFF
        with pytest.raises(CheckpointChecksumError) as info:
            decode_checkpoint(bytes(data))
        assert info.value.code == 12, offset


def test_trailing_garbage_is_a_format_error(ckpt):
    with pytest.raises(CheckpointFormatError, match="after the checksum"):
        decode_checkpoint(encode_checkpoint(ckpt) + b"\x00" * 5)


def test_unknown_version(ckpt):
    data = bytearray(encode_checkpoint(ckpt))
    data[4:8] = struct.pack("<I", 2)
    with pytest.raises(CheckpointVersionError) as info:
        decode_checkpoint(bytes(data))
    assert info.value.code == 10


@pytest.mark.parametrize("keep", [2, 10, 40, -9])
def test_truncated(ckpt, keep):
    data = encode_checkpoint(ckpt)
    with pytest.raises(CheckpointTruncatedError) as info:
        decode_checkpoint(data[:keep])
    assert info.value.code == 11


def test_bad_magic(ckpt):
    data = b"PK\x03\x04" + encode_checkpoint(ckpt)[4:]
    with pytest.raises(CheckpointFormatError) as info:
        decode_checkpoint(data)
    assert info.value.code == 13


def test_missing_file(tmp_path):
    with pytest.raises(CheckpointFormatError, match="not found"):
        checkpoint_load(str(tmp_path / "nope.adgn"))


def test_save_load_restores_trainer_state(tmp_path, tiny_config):
    trainer = Trainer(tiny_config)
    path = checkpoint_save(trainer.checkpoint(), str(tmp_path / "sub" / "c.adgn"))
    loaded = checkpoint_load(path)
    assert tensors_equal(loaded.params(), trainer.bundle.snapshot())
    assert loaded.header["config"] == tiny_config.to_dict()

    restored = restore_bundle(loaded)
    assert tensors_equal(restored.snapshot(), trainer.bundle.snapshot())

    again = Trainer.from_checkpoint(loaded)
    assert again.rng.bit_generator.state == trainer.rng.bit_generator.state
    assert again.counters == trainer.counters


def test_restore_rejects_foreign_tensors(tiny_config):
    ckpt = Trainer(tiny_config).checkpoint()
    del ckpt.tensors["G/down0/w"]
    with pytest.raises(CheckpointFormatError, match="G/down0/w"):
        restore_bundle(ckpt)


def test_tensors_equal_distinguishes_negative_zero():
    assert not tensors_equal({"a": np.array([0.0])}, {"a": np.array([-0.0])})
    assert not tensors_equal({"a": np.zeros(1)}, {"b": np.zeros(1)})
