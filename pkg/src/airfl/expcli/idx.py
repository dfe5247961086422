"""Reader and writer for the big-endian IDX tensor format used by MNIST."""

import gzip
import struct
from pathlib import Path

import numpy as np

from airfl.errors import BadMagic, MissingFile, TruncatedPayload, UnsupportedElementType

UBYTE = 0x08
MAGIC_LABELS = 0x00000801
MAGIC_IMAGES = 0x00000803
_NDIM = {MAGIC_LABELS: 1, MAGIC_IMAGES: 3}


def parse_idx(data):
    """Return ``(dims, array)`` for an unsigned-byte label or image file."""
    data = bytes(data)
    if len(data) < 4:
        raise TruncatedPayload(f"need a 4-byte magic number, got {len(data)} bytes")
    zero0, zero1, dtype, ndim = data[:4]
    if zero0 or zero1:
        raise BadMagic(f"magic must start with two zero bytes, got {data[:4].hex()}")
    if dtype != UBYTE:
        raise UnsupportedElementType(f"element type 0x{dtype:02x} is not unsigned byte")
    magic = struct.unpack(">I", data[:4])[0]
    if magic not in _NDIM:
        raise BadMagic(f"magic 0x{magic:08x} is neither 0x00000801 nor 0x00000803")
    header = 4 + 4 * ndim
    if len(data) < header:
        raise TruncatedPayload(f"header needs {header} bytes, got {len(data)}")
    dims = struct.unpack(f">{ndim}I", data[4:header])
    expected = header + int(np.prod(dims, dtype=np.int64))
    if len(data) != expected:
        kind = "missing" if len(data) < expected else "trailing"
        raise TruncatedPayload(f"{kind} bytes: payload is {len(data) - header}, dims {dims} need {expected - header}")
    arr = np.frombuffer(data, dtype=np.uint8, offset=header).reshape(dims)
    return tuple(int(d) for d in dims), arr


def encode_idx(arr):
    """Serialize a 1-D (labels) or 3-D (images) uint8 array."""
    arr = np.asarray(arr)
    if arr.dtype != np.uint8:
        raise UnsupportedElementType(f"only uint8 is supported, got {arr.dtype}")
    if arr.ndim not in (1, 3):
        raise ValueError("IDX labels are 1-D and images 3-D")
    magic = MAGIC_LABELS if arr.ndim == 1 else MAGIC_IMAGES
    return struct.pack(f">I{arr.ndim}I", magic, *arr.shape) + np.ascontiguousarray(arr).tobytes()


def read_idx(path):
    path = Path(path)
    if not path.exists():
        raise MissingFile(f"IDX file not found: {path}")
    raw = path.read_bytes()
    if path.suffix == ".gz":
        raw = gzip.decompress(raw)
    return parse_idx(raw)


def write_idx(path, arr):
    Path(path).write_bytes(encode_idx(arr))
