"""Reader and writer for the TVGL rank-3 tensor file format.

Layout (little-endian, no padding, no trailing bytes)::

    offset  size  field
    0       4     magic b"TVGL"
    4       4     u32 version (1)
    8       4     u32 ndim (3)
    12      12    u32 dims S, N, P
    24      4*SNP IEEE-754 binary32 values, row-major

Values are held as float64 in memory and narrowed to float32 on write, so a
roundtrip is bit-exact for any tensor whose entries are float32-representable.
"""

import os
import struct

import numpy as np

from .exceptions import (
    BadMagicError,
    DimensionOverflowError,
    ShapeError,
    TrailingBytesError,
    TruncatedPayloadError,
    UnsupportedVersionError,
)

MAGIC = b"TVGL"
VERSION = 1
NDIM = 3
HEADER = struct.Struct("<4sII3I")
HEADER_SIZE = HEADER.size  # 24
# refuse payloads beyond 16 GiB; also guards against corrupted dims
MAX_VALUES = 1 << 32


def encode_tensor(v):
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != NDIM:
        raise ShapeError(f"TVGL stores rank-3 tensors, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("refusing to write non-finite values")
    if np.any(np.abs(arr) > np.finfo(np.float32).max):
        raise ValueError("values overflow binary32")
    S, N, P = arr.shape
    return HEADER.pack(MAGIC, VERSION, NDIM, S, N, P) + arr.astype("<f4").tobytes(order="C")


def decode_tensor(buf):
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise BadMagicError(f"bad magic bytes {bytes(buf[:4])!r}, expected {MAGIC!r}")
    if len(buf) < HEADER_SIZE:
        raise TruncatedPayloadError(f"header needs {HEADER_SIZE} bytes, file has {len(buf)}")
    _, version, ndim, S, N, P = HEADER.unpack_from(buf)
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported TVGL version {version}")
    if ndim != NDIM:
        raise DimensionOverflowError(f"TVGL tensors are rank 3, header declares ndim={ndim}")
    count = S * N * P
    if count > MAX_VALUES:
        raise DimensionOverflowError(f"declared shape ({S}, {N}, {P}) exceeds {MAX_VALUES} values")
    expected = HEADER_SIZE + 4 * count
    if len(buf) < expected:
        raise TruncatedPayloadError(f"shape ({S}, {N}, {P}) needs {expected} bytes, file has {len(buf)}")
    if len(buf) > expected:
        raise TrailingBytesError(f"{len(buf) - expected} unexpected bytes after payload")
    data = np.frombuffer(buf, dtype="<f4", count=count, offset=HEADER_SIZE)
    return data.astype(np.float64).reshape(S, N, P)


def write_tensor(v, path):
    """Write a rank-3 tensor to ``path`` in TVGL format."""
    payload = encode_tensor(v)
    with open(os.fspath(path), "wb") as fh:
        fh.write(payload)


def read_tensor(path):
    """Read a TVGL file into a float64 array of shape ``(S, N, P)``."""
    with open(os.fspath(path), "rb") as fh:
        return decode_tensor(fh.read())
