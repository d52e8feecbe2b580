"""Binary weight container.

Layout (all integers little-endian):

    magic        4 bytes  b"TFWB"
    version      u16
    arch id      u16 length + that many UTF-8 bytes
    param count  u32
    per parameter:
        name     u16 length + UTF-8 bytes
        ndim     u8
        dims     ndim * u32
        data     prod(dims) * float32

Parameters round-trip in order; loading checks magic, version and length.
"""

from __future__ import annotations

import io
import os
import struct
from typing import BinaryIO, Sequence, Union

import numpy as np

from .tensor import EngineError

MAGIC = b"TFWB"
FORMAT_VERSION = 1


class CorruptWeightsError(EngineError):
    pass


class WeightsVersionError(EngineError):
    pass


NamedArrays = Sequence[tuple[str, np.ndarray]]


def write_weights(
    dest: Union[str, os.PathLike, BinaryIO], arch_id: str, params: NamedArrays
) -> None:
    own = isinstance(dest, (str, os.PathLike))
    fh: BinaryIO = open(dest, "wb") if own else dest
    try:
        fh.write(MAGIC)
        fh.write(struct.pack("<H", FORMAT_VERSION))
        arch_bytes = arch_id.encode("utf-8")
        fh.write(struct.pack("<H", len(arch_bytes)))
        fh.write(arch_bytes)
        fh.write(struct.pack("<I", len(params)))
        for name, arr in params:
            arr = np.asarray(arr, dtype=np.float32)
            if arr.ndim:
                arr = np.ascontiguousarray(arr)
            name_bytes = name.encode("utf-8")
            fh.write(struct.pack("<H", len(name_bytes)))
            fh.write(name_bytes)
            fh.write(struct.pack("<B", arr.ndim))
            for d in arr.shape:
                fh.write(struct.pack("<I", d))
            fh.write(arr.astype("<f4").tobytes())
    finally:
        if own:
            fh.close()


def _read_exact(fh: BinaryIO, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise CorruptWeightsError(
            f"truncated weights file while reading {what}: wanted {n} bytes, got {len(data)}"
        )
    return data


def read_weights(
    src: Union[str, os.PathLike, bytes, BinaryIO]
) -> tuple[str, list[tuple[str, np.ndarray]]]:
    if isinstance(src, bytes):
        return read_weights(io.BytesIO(src))
    own = isinstance(src, (str, os.PathLike))
    fh: BinaryIO = open(src, "rb") if own else src
    try:
        magic = _read_exact(fh, 4, "magic")
        if magic != MAGIC:
            raise CorruptWeightsError(f"bad magic {magic!r}, expected {MAGIC!r}")
        (version,) = struct.unpack("<H", _read_exact(fh, 2, "version"))
        if version != FORMAT_VERSION:
            raise WeightsVersionError(
                f"weights format version {version}, this reader supports {FORMAT_VERSION}"
            )
        (arch_len,) = struct.unpack("<H", _read_exact(fh, 2, "arch id length"))
        arch_id = _read_exact(fh, arch_len, "arch id").decode("utf-8")
        (count,) = struct.unpack("<I", _read_exact(fh, 4, "parameter count"))
        params: list[tuple[str, np.ndarray]] = []
        for i in range(count):
            (name_len,) = struct.unpack("<H", _read_exact(fh, 2, f"param {i} name length"))
            name = _read_exact(fh, name_len, f"param {i} name").decode("utf-8")
            (ndim,) = struct.unpack("<B", _read_exact(fh, 1, f"param {i} ndim"))
            dims = struct.unpack(
                f"<{ndim}I", _read_exact(fh, 4 * ndim, f"param {i} dims")
            )
            n_items = int(np.prod(dims)) if dims else 1
            raw = _read_exact(fh, 4 * n_items, f"param {i} ({name}) data")
            arr = np.frombuffer(raw, dtype="<f4").reshape(dims).astype(np.float32)
            params.append((name, arr))
        trailing = fh.read(1)
        if trailing:
            raise CorruptWeightsError("trailing bytes after last parameter")
        return arch_id, params
    finally:
        if own:
            fh.close()
