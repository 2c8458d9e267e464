"""Bit-exact array file codec.

The on-disk format is the NPY v1.0 layout restricted to little-endian
float32/float64, C order, rank 1 to 4:

    offset 0   magic             b"\\x93NUMPY"
    offset 6   version           bytes 0x01 0x00
    offset 8   header length     uint16, little endian
    offset 10  header            ASCII dict with keys 'descr',
                                 'fortran_order', 'shape' (sorted), padded
                                 with spaces so the total preamble is a
                                 multiple of 64 bytes, ending in '\\n'
    then       payload           raw little-endian scalars, C order

Writes are canonical: the same array always produces the same bytes, and
the files are readable by any standard NPY reader.
"""

from __future__ import annotations

import ast
import struct

import numpy as np

from .errors import (
    FormatError,
    LengthMismatchError,
    UnsupportedDtypeError,
    ValidationError,
)

MAGIC = b"\x93NUMPY"
VERSION = b"\x01\x00"
HEADER_ALIGN = 64
MAX_RANK = 4

_DESCR_TO_DTYPE = {"<f4": np.dtype("<f4"), "<f8": np.dtype("<f8")}


def _validate_array(arr: np.ndarray) -> np.ndarray:
    if not isinstance(arr, np.ndarray):
        arr = np.asarray(arr)
    if arr.ndim < 1 or arr.ndim > MAX_RANK:
        raise ValidationError(f"array rank must be 1..{MAX_RANK}, got {arr.ndim}")
    if any(d < 1 for d in arr.shape):
        raise ValidationError(f"array dimensions must be positive, got {arr.shape}")
    kind = arr.dtype.newbyteorder("<")
    if kind not in (np.dtype("<f4"), np.dtype("<f8")):
        raise ValidationError(
            f"unsupported dtype {arr.dtype}; only float32/float64 are written"
        )
    # normalize to little-endian C order without touching the caller's array
    return np.ascontiguousarray(arr, dtype=kind)


def _header_bytes(shape: tuple[int, ...], descr: str) -> bytes:
    shape_repr = repr(tuple(int(d) for d in shape))
    body = f"{{'descr': {descr!r}, 'fortran_order': False, 'shape': {shape_repr}, }}"
    preamble = len(MAGIC) + len(VERSION) + 2
    pad = HEADER_ALIGN - (preamble + len(body) + 1) % HEADER_ALIGN
    if pad == HEADER_ALIGN:
        pad = 0
    header = body + " " * pad + "\n"
    if len(header) > 0xFFFF:
        raise ValidationError("array header too large for NPY v1.0")
    return MAGIC + VERSION + struct.pack("<H", len(header)) + header.encode("latin1")


def write_array(arr: np.ndarray, path) -> None:
    """Write ``arr`` to ``path`` in the canonical format above.

    Identical arrays produce byte-identical files. Raises ValidationError
    for arrays outside the supported dtype/rank envelope; I/O failures are
    re-raised with the path attached.
    """
    data = _validate_array(arr)
    descr = "<f4" if data.dtype.itemsize == 4 else "<f8"
    blob = _header_bytes(data.shape, descr) + data.tobytes(order="C")
    try:
        with open(path, "wb") as fh:
            fh.write(blob)
    except OSError as exc:
        raise OSError(f"failed to write array to {path}: {exc}") from exc


def read_array(path) -> np.ndarray:
    """Read an array written by :func:`write_array` (or any conforming file).

    Raises FormatError (with byte offset) for malformed magic/version/header,
    UnsupportedDtypeError for dtypes outside little-endian float32/float64,
    and LengthMismatchError when the payload length disagrees with the header.
    """
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise OSError(f"failed to read array from {path}: {exc}") from exc

    if len(blob) < 10:
        raise FormatError(f"file too short ({len(blob)} bytes) for an array header", offset=0)
    if blob[:6] != MAGIC:
        raise FormatError(f"bad magic bytes {blob[:6]!r}", offset=0)
    if blob[6:8] != VERSION:
        raise FormatError(f"unsupported format version {blob[6:8]!r}", offset=6)
    (header_len,) = struct.unpack("<H", blob[8:10])
    header_end = 10 + header_len
    if len(blob) < header_end:
        raise FormatError(
            f"declared header length {header_len} exceeds file size", offset=8
        )
    header = blob[10:header_end]
    if not header.endswith(b"\n"):
        raise FormatError("header is not newline-terminated", offset=header_end - 1)
    try:
        meta = ast.literal_eval(header.decode("latin1"))
    except (ValueError, SyntaxError) as exc:
        raise FormatError(f"header is not a literal dict: {exc}", offset=10) from exc
    if not isinstance(meta, dict) or set(meta) != {"descr", "fortran_order", "shape"}:
        raise FormatError(f"header keys {sorted(meta) if isinstance(meta, dict) else meta!r} "
                          "!= ['descr', 'fortran_order', 'shape']", offset=10)
    if meta["descr"] not in _DESCR_TO_DTYPE:
        raise UnsupportedDtypeError(
            f"dtype {meta['descr']!r} not in ('<f4', '<f8')", offset=10
        )
    if meta["fortran_order"] is not False:
        raise FormatError("fortran_order must be False", offset=10)
    shape = meta["shape"]
    if (
        not isinstance(shape, tuple)
        or not 1 <= len(shape) <= MAX_RANK
        or not all(isinstance(d, int) and d >= 1 for d in shape)
    ):
        raise FormatError(f"shape {shape!r} must be a tuple of 1..{MAX_RANK} positive ints",
                          offset=10)

    dtype = _DESCR_TO_DTYPE[meta["descr"]]
    count = 1
    for d in shape:
        count *= d
    expected = count * dtype.itemsize
    payload = blob[header_end:]
    if len(payload) != expected:
        raise LengthMismatchError(
            f"payload is {len(payload)} bytes, header promises {expected}",
            offset=header_end,
        )
    return np.frombuffer(payload, dtype=dtype).reshape(shape).copy()
