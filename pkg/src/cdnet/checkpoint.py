"""Flat binary container for named float64 arrays plus a text manifest.

Layout (all integers little-endian):

    magic   b"CDCK"
    u32     number of arrays
    per array:
        u16     name length, then UTF-8 name bytes
        u8      ndim
        u32*    dims
        f64*    row-major payload, little-endian
    u64     manifest length, then UTF-8 manifest text

The manifest is a flat ``key=value`` block (one pair per line) carrying the
model description and any training state.  Round-trips are bit-exact.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .fileio import atomic_write_bytes

__all__ = ["save_arrays", "load_arrays", "format_manifest", "parse_manifest"]

_MAGIC = b"CDCK"


def format_manifest(entries: dict) -> str:
    lines = []
    for key in sorted(entries):
        value = entries[key]
        text = repr(value) if isinstance(value, float) else str(value)
        if "\n" in text or "=" in str(key):
            raise ValueError(f"manifest entry {key!r} is not flat text")
        lines.append(f"{key}={text}")
    return "\n".join(lines) + "\n"


def parse_manifest(text: str) -> dict[str, str]:
    entries: dict[str, str] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"malformed manifest line: {line!r}")
        entries[key] = value
    return entries


def save_arrays(path, arrays: dict[str, np.ndarray], manifest: dict) -> None:
    """Write named arrays and a manifest to `path` atomically."""
    chunks = [_MAGIC, struct.pack("<I", len(arrays))]
    for name in sorted(arrays):
        data = np.ascontiguousarray(arrays[name], dtype="<f8")
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<B", data.ndim))
        chunks.append(struct.pack(f"<{data.ndim}I", *data.shape))
        chunks.append(data.tobytes())
    text = format_manifest(manifest).encode("utf-8")
    chunks.append(struct.pack("<Q", len(text)))
    chunks.append(text)
    atomic_write_bytes(path, b"".join(chunks))


def load_arrays(path) -> tuple[dict[str, np.ndarray], dict[str, str]]:
    """Read back (arrays, manifest) written by :func:`save_arrays`."""
    blob = Path(path).read_bytes()
    if blob[:4] != _MAGIC:
        raise ValueError(f"{path}: not a checkpoint file (bad magic)")
    offset = 4
    (count,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    arrays: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", blob, offset)
        offset += 2
        name = blob[offset : offset + name_len].decode("utf-8")
        offset += name_len
        (ndim,) = struct.unpack_from("<B", blob, offset)
        offset += 1
        shape = struct.unpack_from(f"<{ndim}I", blob, offset)
        offset += 4 * ndim
        size = int(np.prod(shape)) if ndim else 1
        data = np.frombuffer(blob, dtype="<f8", count=size, offset=offset)
        offset += 8 * size
        arrays[name] = data.reshape(shape).astype(np.float64)
    (text_len,) = struct.unpack_from("<Q", blob, offset)
    offset += 8
    manifest = parse_manifest(blob[offset : offset + text_len].decode("utf-8"))
    return arrays, manifest
