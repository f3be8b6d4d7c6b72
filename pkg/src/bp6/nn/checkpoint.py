"""Binary checkpoint format.

Layout (little-endian)::

    b"BP6C" | u32 version | u32 meta_len | meta (UTF-8 JSON)
    | u32 count | count x (u16 name_len | name | u8 ndim | ndim x u32 | float32 data)
    | u32 CRC32 of every preceding byte
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from ..errors import CorruptStoreError, FormatError

MAGIC = b"BP6C"
VERSION = 1


def encode_checkpoint(state: dict[str, np.ndarray], meta: dict | None = None) -> bytes:
    meta_bytes = json.dumps(meta or {}, sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<II", VERSION, len(meta_bytes)), meta_bytes, struct.pack("<I", len(state))]
    for name, value in state.items():
        arr = np.asarray(value, dtype="<f4")
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack(f"<B{arr.ndim}I", arr.ndim, *arr.shape))
        parts.append(arr.tobytes(order="C"))
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def decode_checkpoint(blob: bytes) -> tuple[dict[str, np.ndarray], dict]:
    if len(blob) < 16 or blob[:4] != MAGIC:
        raise FormatError("not a checkpoint file (bad magic)")
    body, (crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) != crc:
        raise CorruptStoreError("checkpoint CRC32 mismatch")
    version, meta_len = struct.unpack_from("<II", body, 4)
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}")
    pos = 12
    try:
        meta = json.loads(body[pos : pos + meta_len].decode("utf-8"))
        pos += meta_len
        (count,) = struct.unpack_from("<I", body, pos)
        pos += 4
        state = {}
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", body, pos)
            pos += 2
            name = body[pos : pos + nlen].decode("utf-8")
            pos += nlen
            (ndim,) = struct.unpack_from("<B", body, pos)
            shape = struct.unpack_from(f"<{ndim}I", body, pos + 1)
            pos += 1 + 4 * ndim
            size = int(np.prod(shape, dtype=np.int64))
            if pos + 4 * size > len(body):
                raise CorruptStoreError(f"checkpoint truncated inside {name!r}")
            state[name] = np.frombuffer(body, dtype="<f4", count=size, offset=pos).reshape(shape).astype(np.float64)
            pos += 4 * size
    except (struct.error, UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CorruptStoreError(f"malformed checkpoint: {e}") from None
    if pos != len(body):
        raise CorruptStoreError("trailing bytes after checkpoint arrays")
    return state, meta


def save_checkpoint(path, state: dict[str, np.ndarray], meta: dict | None = None):
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(encode_checkpoint(state, meta))
    tmp.replace(path)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    try:
        blob = Path(path).read_bytes()
    except OSError as e:
        raise FormatError(f"cannot read checkpoint {path}: {e}") from None
    return decode_checkpoint(blob)
