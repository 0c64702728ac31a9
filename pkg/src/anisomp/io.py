"""Matrix file I/O: binary format with a CSV fallback.

Binary layout (little endian): 8-byte magic ``ANISOMP1``, uint64 n, uint64 N,
then n*N float64 values in row-major order.  Anything without the magic is
parsed as CSV.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"ANISOMP1"

__all__ = ["MAGIC", "write_matrix", "read_matrix"]


def write_matrix(path, data: np.ndarray, fmt: str = "binary") -> None:
    data = np.ascontiguousarray(np.asarray(data, dtype=np.float64))
    if data.ndim != 2:
        raise ValueError("matrix must be two-dimensional")
    if fmt == "binary":
        n, N = data.shape
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<QQ", n, N))
            fh.write(data.tobytes(order="C"))
    elif fmt == "csv":
        np.savetxt(path, data, delimiter=",")
    else:
        raise ValueError(f"unknown matrix format {fmt!r}")


def read_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(len(MAGIC))
        if head == MAGIC:
            n, N = struct.unpack("<QQ", fh.read(16))
            payload = np.frombuffer(fh.read(8 * n * N), dtype="<f8", count=n * N)
            if payload.size != n * N:
                raise ValueError(f"{path}: truncated binary matrix")
            return payload.reshape(n, N).copy()
    data = np.loadtxt(path, delimiter=",", dtype=float)
    if data.ndim == 1:
        data = data[None, :]
    return data
