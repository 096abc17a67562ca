"""Parameter file format.

Single binary file, little-endian throughout:

    magic "PSG1"
    uint32  parameter count
    per parameter:
        uint32  name byte length
        bytes   name (UTF-8)
        uint32  rank
        int64   extent per axis
        float32 data, row-major

Values are stored as float32 regardless of in-memory dtype.
"""

import struct

import numpy as np

from .tensor import Parameter, ParameterCollection

MAGIC = b"PSG1"


def save_params(path, params: ParameterCollection) -> None:
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(params)))
        for p in params:
            name = p.name.encode("utf-8")
            f.write(struct.pack("<I", len(name)))
            f.write(name)
            f.write(struct.pack("<I", p.data.ndim))
            f.write(struct.pack(f"<{p.data.ndim}q", *p.data.shape))
            f.write(np.ascontiguousarray(p.data, dtype="<f4").tobytes())


def _read_exact(f, n: int) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise ValueError(f"truncated parameter file: wanted {n} bytes, got {len(buf)}")
    return buf


def load_params(path) -> ParameterCollection:
    with open(path, "rb") as f:
        if _read_exact(f, 4) != MAGIC:
            raise ValueError(f"{path}: not a parameter file (bad magic)")
        (count,) = struct.unpack("<I", _read_exact(f, 4))
        out = ParameterCollection()
        for _ in range(count):
            (name_len,) = struct.unpack("<I", _read_exact(f, 4))
            name = _read_exact(f, name_len).decode("utf-8")
            (rank,) = struct.unpack("<I", _read_exact(f, 4))
            shape = struct.unpack(f"<{rank}q", _read_exact(f, 8 * rank))
            n_vals = int(np.prod(shape, dtype=np.int64)) if rank else 1
            raw = _read_exact(f, 4 * n_vals)
            data = np.frombuffer(raw, dtype="<f4").reshape(shape).astype(np.float32)
            out.add(Parameter(name, data))
        trailing = f.read(1)
        if trailing:
            raise ValueError(f"{path}: trailing bytes after last parameter")
    return out
