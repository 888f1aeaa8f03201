"""``VOTC`` checkpoint files.

``b"VOTC"``, u16 version, u32 header length, UTF-8 JSON header (config,
metadata, tensor manifest of name/dtype/shape/offset), then raw little-endian
float32 parameter data.  The header is serialised with sorted keys and holds
no timestamps, so identical parameters give identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from ..model.config import VOTConfig, param_shapes
from ..numerics.optim import ParameterStore
from .clipfile import FormatError, atomic_write

MAGIC = b"VOTC"
VERSION = 1
_PREFIX = struct.Struct("<4sHI")


class CheckpointMismatch(ValueError):
    """Checkpoint does not fit the requested model configuration."""


def encode_checkpoint(cfg: VOTConfig, params: ParameterStore, metadata: dict | None = None) -> bytes:
    tensors = []
    chunks = []
    offset = 0
    for name, t in params.items():
        arr = np.ascontiguousarray(t.data, dtype="<f4")
        tensors.append({"name": name, "dtype": "f32", "shape": list(arr.shape), "offset": offset})
        chunks.append(arr.tobytes())
        offset += arr.nbytes
    header = {
        "config": cfg.to_dict(),
        "config_hash": cfg.hash(),
        "metadata": metadata or {},
        "tensors": tensors,
        "data_bytes": offset,
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    return _PREFIX.pack(MAGIC, VERSION, len(blob)) + blob + b"".join(chunks)


def decode_checkpoint(blob: bytes) -> tuple[VOTConfig, ParameterStore, dict]:
    if len(blob) < _PREFIX.size:
        raise FormatError(f"truncated checkpoint: {len(blob)} bytes")
    magic, version, hlen = _PREFIX.unpack_from(blob)
    if magic != MAGIC:
        raise FormatError(f"bad checkpoint magic {magic!r} at byte offset 0")
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version} at byte offset 4")
    start = _PREFIX.size + hlen
    if len(blob) < start:
        raise FormatError(f"truncated checkpoint header: need {start} bytes, have {len(blob)}")
    header = json.loads(blob[_PREFIX.size:start])
    if len(blob) != start + header["data_bytes"]:
        raise FormatError(f"checkpoint size mismatch: expected {start + header['data_bytes']}, got {len(blob)}")
    cfg = VOTConfig.from_dict(header["config"])
    arrays = {}
    for t in header["tensors"]:
        n = int(np.prod(t["shape"])) if t["shape"] else 1
        arr = np.frombuffer(blob, dtype="<f4", count=n, offset=start + t["offset"])
        arrays[t["name"]] = arr.reshape(t["shape"]).astype(np.float32)
    meta = dict(header["metadata"])
    meta["config_hash"] = header["config_hash"]
    return cfg, ParameterStore(arrays), meta


def save_checkpoint(path, cfg: VOTConfig, params: ParameterStore, metadata: dict | None = None) -> str:
    blob = encode_checkpoint(cfg, params, metadata)
    atomic_write(path, blob)
    return hashlib.sha256(blob).hexdigest()


def load_checkpoint(path, expect: VOTConfig | None = None) -> tuple[VOTConfig, ParameterStore, dict]:
    cfg, params, meta = decode_checkpoint(Path(path).read_bytes())
    check_compatible(cfg, params, expect)
    return cfg, params, meta


def check_compatible(cfg: VOTConfig, params: ParameterStore, expect: VOTConfig | None = None) -> None:
    if expect is not None and expect.hash() != cfg.hash():
        raise CheckpointMismatch(f"config hash mismatch: checkpoint {cfg.hash()} vs expected {expect.hash()}")
    shapes = param_shapes(cfg)
    got = {k: tuple(v.shape) for k, v in params.items()}
    if got != {k: tuple(v) for k, v in shapes.items()}:
        diff = sorted(set(got.items()) ^ set((k, tuple(v)) for k, v in shapes.items()))
        raise CheckpointMismatch(f"parameters do not match config hash {cfg.hash()}: {diff[:6]}")


def file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
