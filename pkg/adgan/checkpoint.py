#!/usr/bin/env python3

"""
adgan.checkpoint
----------------
Binary checkpoint files.

Layout (all integers little-endian)::

    b"ADGN"                         magic
    u32   version                   FORMAT_VERSION
    u32   n, n bytes                ASCII JSON header: config snapshot, counters, rng state,
                                    payload size of the tensor section
    u32   tensor count
    per tensor:
      u32 name length, name bytes (UTF-8)
      u32 rank, rank × u64 dims
      prod(dims) × f64 values
    u32   CRC32 of every preceding byte

Values are always stored as float64, so float32 runs round-trip bit-exactly
as well.  Each failure mode has its own exception (and numeric ``code``):
bad magic, other version, truncated file, checksum mismatch.
"""
from __future__ import annotations

import json
import logging
import posixpath
import struct
import zlib
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Any, Dict, Mapping, Tuple

import fsspec
import numpy as np

from adgan.errors import (
    CheckpointChecksumError,
    CheckpointError,
    CheckpointFormatError,
    CheckpointTruncatedError,
    CheckpointVersionError,
)

LOGGER = logging.getLogger(__name__)

MAGIC = b"ADGN"
FORMAT_VERSION = 1

_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")

# header key holding the byte size of the tensor section; never exposed on Checkpoint.header
_LAYOUT_KEY = "layout"


@dataclass
class Checkpoint:
    """
    Everything needed to resume or deploy a run.

    ``tensors`` holds network parameters (``"G/down0/w"``…) and optimizer
    accumulators (``"opt/G/down0/w"``…) in one ordered namespace; ``header``
    holds the config snapshot under ``"config"`` plus counters and rng state.
    """

    header: Dict[str, Any]
    tensors: "OrderedDict[str, np.ndarray]" = field(default_factory=OrderedDict)
    version: int = FORMAT_VERSION

    @property
    def config_json(self) -> str:
        from adgan.config import canonical_json

        return canonical_json(self.header["config"])

    def params(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((k, v) for k, v in self.tensors.items() if not k.startswith("opt/"))

    def optimizer_state(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((k[4:], v) for k, v in self.tensors.items() if k.startswith("opt/"))

    def counters(self) -> Dict[str, int]:
        return dict(self.header.get("counters", {}))


# ───────────────────────────────────────────────────────────────────────────
#  Encoding
# ───────────────────────────────────────────────────────────────────────────
def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    parts = [_U32.pack(len(ckpt.tensors))]
    for name, arr in ckpt.tensors.items():
        raw_name = name.encode("utf-8")
        values = np.ascontiguousarray(arr, dtype="<f8")
        parts.append(_U32.pack(len(raw_name)))
        parts.append(raw_name)
        parts.append(_U32.pack(values.ndim))
        parts.extend(_U64.pack(d) for d in values.shape)
        parts.append(values.tobytes())
    payload = b"".join(parts)
    head = dict(ckpt.header, **{_LAYOUT_KEY: {"payload_bytes": len(payload)}})
    # ASCII only, so character offsets equal byte offsets when diagnosing damage
    header = json.dumps(head, sort_keys=True, separators=(",", ":"), ensure_ascii=True).encode("ascii")
    body = b"".join([MAGIC, _U32.pack(ckpt.version), _U32.pack(len(header)), header, payload])
    return body + _U32.pack(zlib.crc32(body) & 0xFFFFFFFF)


class _Reader:
    def __init__(self, data: bytes, end: int):
        self.data, self.pos, self.end = data, 0, end

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > self.end:
            raise CheckpointTruncatedError(
                f"checkpoint truncated: need {n} bytes at offset {self.pos}, "
                f"{max(0, self.end - self.pos)} left"
            )
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]

    def u64(self) -> int:
        return _U64.unpack(self.take(8))[0]


def _parse(data: bytes, end: int) -> Tuple[Dict[str, Any], "OrderedDict[str, np.ndarray]", int]:
    rd = _Reader(data, end)
    rd.take(8)
    try:
        header = json.loads(rd.take(rd.u32()).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointChecksumError(f"checkpoint header unreadable: {exc}") from None
    tensors: "OrderedDict[str, np.ndarray]" = OrderedDict()
    for _ in range(rd.u32()):
        name = rd.take(rd.u32()).decode("utf-8", errors="replace")
        dims = tuple(rd.u64() for _ in range(rd.u32()))
        count = int(np.prod(dims, dtype=np.uint64)) if dims else 1
        tensors[name] = np.frombuffer(rd.take(8 * count), dtype="<f8").reshape(dims).astype(np.float64)
    return header, tensors, rd.pos


def decode_checkpoint(data: bytes) -> Checkpoint:
    if len(data) < 4 or data[:4] != MAGIC:
        if len(data) < 4 and MAGIC.startswith(data):
            raise CheckpointTruncatedError(f"checkpoint truncated: {len(data)} bytes")
        raise CheckpointFormatError(f"not a checkpoint: magic {data[:4]!r}, expected {MAGIC!r}")
    if len(data) < 8:
        raise CheckpointTruncatedError(f"checkpoint truncated: {len(data)} bytes")
    version = _U32.unpack(data[4:8])[0]
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"checkpoint format version {version} is not supported (expected {FORMAT_VERSION})"
        )

    if len(data) < 12:
        raise CheckpointTruncatedError(f"checkpoint truncated: {len(data)} bytes")
    stored = _U32.unpack(data[-4:])[0]
    if zlib.crc32(data[:-4]) & 0xFFFFFFFF != stored:
        raise _classify_damage(data)

    header, tensors, pos = _parse(data, len(data) - 4)
    if pos != len(data) - 4:
        raise CheckpointFormatError(f"{len(data) - 4 - pos} unexpected bytes before the checksum")
    header.pop(_LAYOUT_KEY, None)
    return Checkpoint(header=header, tensors=tensors, version=version)


def _classify_damage(data: bytes) -> CheckpointError:
    """
    Tell a short file from a corrupted one once the CRC32 has failed.

    Length fields of a damaged file cannot be trusted, so the expected size
    comes from the JSON header itself (located by parsing, not by its length
    prefix) and the payload size it records.
    """
    corrupted = CheckpointChecksumError("checkpoint CRC32 mismatch: file is corrupted")
    try:
        head, end = json.JSONDecoder().raw_decode(data[12:].decode("latin-1"))
    except json.JSONDecodeError:
        declared = _U32.unpack(data[8:12])[0]
        if 12 + declared + 4 > len(data):
            return CheckpointTruncatedError(f"checkpoint truncated inside the header: {len(data)} bytes")
        return corrupted
    layout = head.get(_LAYOUT_KEY) if isinstance(head, dict) else None
    payload = layout.get("payload_bytes") if isinstance(layout, dict) else None
    if not isinstance(payload, int):
        return corrupted
    expected = 12 + end + payload + 4
    if len(data) < expected:
        return CheckpointTruncatedError(f"checkpoint truncated: {len(data)} of {expected} bytes")
    if len(data) > expected:
        return CheckpointFormatError(f"{len(data) - expected} unexpected bytes after the checksum")
    return corrupted


# ───────────────────────────────────────────────────────────────────────────
#  Files
# ───────────────────────────────────────────────────────────────────────────
def checkpoint_save(ckpt: Checkpoint, path: str) -> str:
    data = encode_checkpoint(ckpt)
    fs, fs_path = fsspec.core.url_to_fs(str(path))
    parent = posixpath.dirname(fs_path)
    if parent:
        fs.makedirs(parent, exist_ok=True)
    with fs.open(fs_path, "wb") as fh:
        fh.write(data)
    LOGGER.info("💾  checkpoint → %s (%d tensors, %.1f MiB)", path, len(ckpt.tensors), len(data) / 2**20)
    return str(path)


def checkpoint_load(path: str) -> Checkpoint:
    fs, fs_path = fsspec.core.url_to_fs(str(path))
    if not fs.exists(fs_path):
        raise CheckpointFormatError(f"checkpoint not found: {path}")
    with fs.open(fs_path, "rb") as fh:
        data = fh.read()
    ckpt = decode_checkpoint(data)
    LOGGER.debug("loaded checkpoint %s (%d tensors)", path, len(ckpt.tensors))
    return ckpt


def tensors_equal(a: Mapping[str, np.ndarray], b: Mapping[str, np.ndarray]) -> bool:
    """Same names, same shapes, bit-identical values."""
    if list(a) != list(b):
        return False
    return all(a[k].shape == b[k].shape and a[k].tobytes() == b[k].tobytes() for k in a)
