"""Versioned binary container: magic, JSON header, raw little-endian columns.

Layout::

    b"LOBMIX\\x00" + u8 format version
    u64 LE header length
    header (UTF-8 JSON, sorted keys)
    column payloads, concatenated in header order

Output is byte-stable for identical inputs.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"LOBMIX\x00"
FORMAT_VERSION = 1


class ContainerError(ValueError):
    pass


def _le(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    if a.dtype.byteorder == ">" or (a.dtype.byteorder == "=" and not np.little_endian):
        a = a.astype(a.dtype.newbyteorder("<"))
    return a


def write_container(path: str | Path, header: dict, arrays: dict[str, np.ndarray]) -> None:
    cols = []
    payloads = []
    offset = 0
    for name in sorted(arrays):
        a = _le(np.asarray(arrays[name]))
        if a.dtype == object:
            raise ContainerError(f"column {name} has object dtype")
        raw = a.tobytes(order="C")
        cols.append({"name": name, "dtype": a.dtype.str, "shape": list(a.shape),
                     "offset": offset, "nbytes": len(raw)})
        payloads.append(raw)
        offset += len(raw)
    full = dict(header)
    full["columns"] = cols
    hbytes = json.dumps(full, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC + bytes([FORMAT_VERSION]))
        fh.write(struct.pack("<Q", len(hbytes)))
        fh.write(hbytes)
        for raw in payloads:
            fh.write(raw)


def read_container(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    data = Path(path).read_bytes()
    if data[:len(MAGIC)] != MAGIC:
        raise ContainerError(f"{path}: not a lobmix container")
    version = data[len(MAGIC)]
    if version != FORMAT_VERSION:
        raise ContainerError(f"{path}: unsupported format version {version}")
    pos = len(MAGIC) + 1
    (hlen,) = struct.unpack_from("<Q", data, pos)
    pos += 8
    header = json.loads(data[pos:pos + hlen].decode("utf-8"))
    pos += hlen
    arrays = {}
    for col in header.pop("columns"):
        start = pos + col["offset"]
        buf = data[start:start + col["nbytes"]]
        arrays[col["name"]] = np.frombuffer(buf, dtype=np.dtype(col["dtype"])).reshape(col["shape"]).copy()
    return header, arrays


def config_hash(obj) -> str:
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]
