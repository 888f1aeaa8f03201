"""``.cgpv`` single-view clip files and ``traj.csv`` trajectory files.

Layout (little-endian): ``b"CGPV"``, u16 version, u8 role (0 top, 1 bottom),
u16 T, H, W, C, then ``T*H*W*C`` bytes of frame-major row-major RGB.
"""

from __future__ import annotations

import csv
import io
import os
import struct
from pathlib import Path

import numpy as np

MAGIC = b"CGPV"
VERSION = 1
ROLES = {"top": 0, "bottom": 1}
_HEADER = struct.Struct("<4sHBHHHH")
HEADER_SIZE = _HEADER.size  # 15


class FormatError(ValueError):
    """A file does not match its binary or text format."""


def encode_clip(frames: np.ndarray, role: str | int) -> bytes:
    frames = np.asarray(frames)
    if frames.dtype != np.uint8 or frames.ndim != 4:
        raise FormatError(f"clip must be a uint8 T x H x W x C array, got {frames.dtype} {frames.shape}")
    if any(n > 0xFFFF for n in frames.shape):
        raise FormatError(f"clip dimension exceeds u16: {frames.shape}")
    role_id = ROLES[role] if isinstance(role, str) else int(role)
    return _HEADER.pack(MAGIC, VERSION, role_id, *frames.shape) + np.ascontiguousarray(frames).tobytes()


def decode_clip(blob: bytes) -> tuple[np.ndarray, int]:
    if len(blob) < HEADER_SIZE:
        raise FormatError(f"truncated header at byte offset {len(blob)}: expected {HEADER_SIZE} bytes")
    magic, version, role, t, h, w, c = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r} at byte offset 0")
    if version != VERSION:
        raise FormatError(f"unsupported version {version} at byte offset 4")
    if role not in ROLES.values():
        raise FormatError(f"unknown role {role} at byte offset 6")
    expected = HEADER_SIZE + t * h * w * c
    if len(blob) != expected:
        raise FormatError(f"size mismatch: expected {expected} bytes, file has {len(blob)} "
                          f"(payload starts at byte offset {HEADER_SIZE})")
    frames = np.frombuffer(blob, dtype=np.uint8, offset=HEADER_SIZE).reshape(t, h, w, c).copy()
    return frames, role


def atomic_write(path: str | os.PathLike, data: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def write_clip(frames: np.ndarray, path, role: str | int = "top") -> None:
    atomic_write(path, encode_clip(frames, role))


def read_clip(path) -> np.ndarray:
    return decode_clip(Path(path).read_bytes())[0]


def read_clip_header(path) -> dict:
    with open(path, "rb") as fh:
        head = fh.read(HEADER_SIZE)
    if len(head) < HEADER_SIZE:
        raise FormatError(f"truncated header in {path}")
    magic, version, role, t, h, w, c = _HEADER.unpack(head)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r} in {path}")
    return {"version": version, "role": role, "shape": (t, h, w, c),
            "expected_size": HEADER_SIZE + t * h * w * c}


def encode_trajectory(triples: np.ndarray) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["i", "x", "y"])
    for i, x, y in np.asarray(triples, dtype=np.int64):
        writer.writerow([int(i), int(x), int(y)])
    return buf.getvalue().encode()


def write_trajectory(triples: np.ndarray, path) -> None:
    atomic_write(path, encode_trajectory(triples))


def read_trajectory(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["i", "x", "y"]:
        raise FormatError(f"{path}: missing 'i,x,y' header")
    try:
        return np.array([[int(v) for v in r] for r in rows[1:]], dtype=np.int64).reshape(-1, 3)
    except ValueError as err:
        raise FormatError(f"{path}: {err}") from err
