"""Binary segment store plus JSON sidecar.

Layout (little-endian)::

    b"BP6S" | u32 version | u32 count
    | count x (u16 len | subject | u16 len | state | u32 window_index
               | 2 x float32 label | six float32 blocks, row-major)
    | u32 CRC32 of every preceding byte

Block shapes are fixed at (1, 6, 2, 3, 3, 3) x segment length (1000 by
default, recorded in the sidecar). Unlabeled samples store NaN labels.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from .data import BLOCK_SIZES, SEGMENT, SixModalSample
from .errors import CorruptStoreError, FormatError

MAGIC = b"BP6S"
VERSION = 1


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<H", len(raw)) + raw


def encode_store(samples, length: int = SEGMENT) -> bytes:
    parts = [MAGIC, struct.pack("<II", VERSION, len(samples))]
    for s in samples:
        label = s.label if s.label is not None else (np.nan, np.nan)
        parts += [_pack_str(s.subject_id), _pack_str(s.motion_state), struct.pack("<I", s.window_index),
                  np.asarray(label, dtype="<f4").tobytes()]
        for block, c in zip(s.blocks, BLOCK_SIZES):
            if block.shape != (c, length):
                raise FormatError(f"sample {s.key}: block shape {block.shape}, expected {(c, length)}")
            parts.append(np.ascontiguousarray(block, dtype="<f4").tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def decode_store(blob: bytes, length: int = SEGMENT) -> list[SixModalSample]:
    if len(blob) < 4 or blob[:4] != MAGIC:
        raise FormatError("not a segment store (bad magic)")
    if len(blob) < 16:
        raise CorruptStoreError("segment store truncated in header")
    version, count = struct.unpack_from("<II", blob, 4)
    if version != VERSION:
        raise FormatError(f"unsupported store version {version}")
    body, (crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) != crc:
        raise CorruptStoreError("segment store CRC32 mismatch (truncated or altered)")
    pos = 12
    out = []
    try:
        for _ in range(count):
            strs = []
            for _ in range(2):
                (n,) = struct.unpack_from("<H", body, pos)
                strs.append(body[pos + 2 : pos + 2 + n].decode("utf-8"))
                pos += 2 + n
            (win,) = struct.unpack_from("<I", body, pos)
            pos += 4
            label = np.frombuffer(body, dtype="<f4", count=2, offset=pos)
            pos += 8
            blocks = []
            for c in BLOCK_SIZES:
                size = c * length
                if pos + 4 * size > len(body):
                    raise CorruptStoreError("segment store truncated inside a sample")
                blocks.append(np.frombuffer(body, dtype="<f4", count=size, offset=pos).reshape(c, length).astype(np.float32))
                pos += 4 * size
            lab = None if np.all(np.isnan(label)) else (float(label[0]), float(label[1]))
            out.append(SixModalSample(tuple(blocks), lab, strs[0], strs[1], int(win)))
    except (struct.error, UnicodeDecodeError) as e:
        raise CorruptStoreError(f"malformed segment store: {e}") from None
    if pos != len(body):
        raise CorruptStoreError("trailing bytes after the last sample")
    return out


def persist_store(samples, path, meta: dict | None = None, length: int = SEGMENT):
    """Write the store and its sidecar (seed, config hash, counts, ...)."""
    samples = list(samples)
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(encode_store(samples, length))
    tmp.replace(path)
    side = dict(meta or {})
    side.update(count=len(samples), segment_length=length, format_version=VERSION,
                labeled=sum(s.label is not None for s in samples))
    sidecar_path(path).write_text(json.dumps(side, indent=2, sort_keys=True))


def load_store(path) -> list[SixModalSample]:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise FormatError(f"cannot read store {path}: {e}") from None
    length = SEGMENT
    side = sidecar_path(path)
    if side.exists():
        length = int(json.loads(side.read_text()).get("segment_length", SEGMENT))
    return decode_store(blob, length)


def load_sidecar(path) -> dict:
    side = sidecar_path(path)
    return json.loads(side.read_text()) if side.exists() else {}
