"""Flat binary snapshots of box arrays (kernels and Green's functions).

Layout, little endian::

    magic  b"CLKB"      4 bytes
    version            uint16
    kind               uint8   (0 kernel, 1 Green's function, 2 log Green's function)
    d                  uint8
    R                  uint32
    lam                float64 (0 for kernels)
    spec_hash          32 bytes (sha256 of the defining config)
    data               float64 * (2R+1)^d, C order
"""
from __future__ import annotations

import hashlib
import struct

import numpy as np

from .errors import ValidationError

MAGIC = b"CLKB"
VERSION = 1
KINDS = {"kernel": 0, "green": 1, "log_green": 2}
_HEADER = struct.Struct("<4sHBBId32s")


def sha256_bytes(text: str) -> bytes:
    return hashlib.sha256(text.encode()).digest()


def write_box(path, kind: str, array: np.ndarray, spec_hash: bytes, lam: float = 0.0) -> None:
    d = array.ndim
    R = (array.shape[0] - 1) // 2
    if any(n != 2 * R + 1 for n in array.shape):
        raise ValidationError("box array must have shape (2R+1,)*d")
    if len(spec_hash) != 32:
        raise ValidationError("spec hash must be 32 bytes")
    header = _HEADER.pack(MAGIC, VERSION, KINDS[kind], d, R, float(lam), spec_hash)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(array, dtype="<f8").tobytes())


def read_box(path):
    """Return ``(kind, array, spec_hash, lam)``."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ValidationError("file too short for header")
    magic, version, kind, d, R, lam, h = _HEADER.unpack_from(raw)
    if magic != MAGIC or version != VERSION:
        raise ValidationError("not a corrlen box file or unsupported version")
    n = (2 * R + 1) ** d
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if data.size != n:
        raise ValidationError(f"expected {n} values, found {data.size}")
    kind_name = {v: k for k, v in KINDS.items()}[kind]
    return kind_name, data.reshape((2 * R + 1,) * d).copy(), h, lam
