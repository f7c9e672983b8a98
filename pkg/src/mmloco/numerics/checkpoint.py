"""WAQ1 parameter files.

Layout, all little-endian::

    b"WAQ1"
    repeated until EOF:
        uint32   name length in bytes
        bytes    UTF-8 name
        uint32   rank
        uint64 * rank   dims
        float64 * prod(dims)   row-major values
"""
from __future__ import annotations

import math
import os
import struct
from typing import Mapping

import numpy as np

MAGIC = b"WAQ1"


def save_parameters(path: str | os.PathLike, named: Mapping[str, np.ndarray]) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        for name, arr in named.items():
            arr = np.asarray(arr, dtype="<f8", order="C")
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", arr.ndim))
            if arr.ndim:
                fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(arr.tobytes(order="C"))


def load_parameters(path: str | os.PathLike) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] != MAGIC:
        raise ValueError(f"{path}: not a WAQ1 file (magic {buf[:4]!r})")
    out: dict[str, np.ndarray] = {}
    pos = 4
    while pos < len(buf):
        (n,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        name = buf[pos:pos + n].decode("utf-8")
        pos += n
        (rank,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        dims = struct.unpack_from(f"<{rank}Q", buf, pos) if rank else ()
        pos += 8 * rank
        count = math.prod(dims)
        if pos + 8 * count > len(buf):
            raise ValueError(f"{path}: truncated record {name!r}")
        out[name] = np.frombuffer(buf, dtype="<f8", count=count, offset=pos).reshape(dims).astype(np.float64)
        pos += 8 * count
    return out
