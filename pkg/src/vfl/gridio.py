"""Binary grid dumps: an 8-byte little-endian N, then N*N float64 values in
row-major order (interleaved real/imaginary pairs for complex fields)."""

from __future__ import annotations

import struct

import numpy as np


def write_field(path, values: np.ndarray) -> None:
    values = np.asarray(values)
    n = values.shape[0]
    if values.shape != (n, n):
        raise ValueError("field must be square")
    if np.iscomplexobj(values):
        body = np.stack([values.real, values.imag], axis=-1).astype("<f8")
    else:
        body = values.astype("<f8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", n))
        fh.write(np.ascontiguousarray(body).tobytes())


def read_field(path, complex_values: bool = False) -> np.ndarray:
    with open(path, "rb") as fh:
        (n,) = struct.unpack("<Q", fh.read(8))
        data = np.frombuffer(fh.read(), dtype="<f8")
    if complex_values:
        data = data.reshape(n, n, 2)
        return data[..., 0] + 1j * data[..., 1]
    return data.reshape(n, n).copy()
