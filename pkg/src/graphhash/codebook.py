"""Bit-packed binary codes and Hamming distance over them.

Rows are stored little-endian within bytes: bit k of a code lives in byte
k // 8 at bit position k % 8, with padding bits beyond d kept zero. A row
therefore equals ``int.from_bytes(row, "little")`` when read as an integer.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import DataError
from .fileio import atomic_open

_CODEBOOK_MAGIC = b"BGEC"
_CODEBOOK_VERSION = 1


class BinaryCodebook:
    __slots__ = ("dim", "codes")

    def __init__(self, dim: int, codes: np.ndarray):
        codes = np.asarray(codes, dtype=np.uint8)
        if dim < 1:
            raise DataError("codebook dimension must be >= 1")
        if codes.ndim != 2 or codes.shape[1] != (dim + 7) // 8:
            raise DataError(
                f"codes must be N x {(dim + 7) // 8} bytes for dim {dim}, got {codes.shape}"
            )
        pad = 8 * codes.shape[1] - dim
        if pad and codes.size and (codes[:, -1] >> (8 - pad)).any():
            raise DataError("padding bits beyond dim must be zero")
        self.dim = int(dim)
        self.codes = codes
        self.codes.setflags(write=False)

    @classmethod
    def from_bits(cls, bits: np.ndarray) -> "BinaryCodebook":
        bits = np.asarray(bits)
        if bits.ndim != 2:
            raise DataError("bit matrix must be N x d")
        packed = np.packbits(bits.astype(np.uint8), axis=1, bitorder="little")
        return cls(bits.shape[1], packed)

    @property
    def num_nodes(self) -> int:
        return self.codes.shape[0]

    @property
    def row_bytes(self) -> int:
        return self.codes.shape[1]

    def bits(self) -> np.ndarray:
        return np.unpackbits(self.codes, axis=1, count=self.dim, bitorder="little")

    def row(self, i: int) -> np.ndarray:
        self._check_node(i)
        return self.codes[i]

    def code_int(self, i: int) -> int:
        self._check_node(i)
        return int.from_bytes(self.codes[i].tobytes(), "little")

    def code_ints(self) -> np.ndarray:
        """All codes as uint64 words; hash addressing requires d <= 64."""
        if self.dim > 64:
            raise DataError(f"codes of dim {self.dim} do not fit a 64-bit word")
        padded = np.zeros((self.num_nodes, 8), dtype=np.uint8)
        padded[:, : self.row_bytes] = self.codes
        return padded.view("<u8").ravel()

    def _check_node(self, i: int) -> None:
        if not 0 <= i < self.num_nodes:
            raise DataError(f"node {i} outside codebook of {self.num_nodes} rows")


def discretize(model_or_probs) -> BinaryCodebook:
    """Round each probability to its most likely bit: 1 iff p > 1/2.

    Exact halves round to 0, matching the strict inequality.
    """
    probs = getattr(model_or_probs, "probabilities", model_or_probs)
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2:
        raise DataError("probabilities must be an N x d matrix")
    return BinaryCodebook.from_bits(probs > 0.5)


def popcount_rows(byte_rows: np.ndarray) -> np.ndarray:
    """Set-bit count per row of a packed uint8 array."""
    return np.bitwise_count(byte_rows).sum(axis=-1, dtype=np.int64)


def hamming(codebook: BinaryCodebook, i: int, j: int) -> int:
    """Number of disagreeing bits between rows i and j."""
    a = codebook.row(i)
    b = codebook.row(j)
    return int(popcount_rows(a ^ b))


def pack_code(code, dim: int) -> np.ndarray:
    """Normalize a query code (int, bit sequence, or packed row) to packed bytes."""
    nbytes = (dim + 7) // 8
    if isinstance(code, (int, np.integer)):
        if code < 0 or int(code) >> dim:
            raise DataError(f"code {code} does not fit {dim} bits")
        return np.frombuffer(int(code).to_bytes(nbytes, "little"), dtype=np.uint8).copy()
    arr = np.asarray(code)
    if arr.ndim != 1:
        raise DataError(f"cannot interpret query code of shape {arr.shape} for dim {dim}")
    if arr.size == dim and np.all(arr <= 1):
        return np.packbits(arr.astype(np.uint8), bitorder="little")
    if arr.size == nbytes and arr.dtype == np.uint8:
        return arr
    raise DataError(f"cannot interpret query code of shape {arr.shape} for dim {dim}")


def code_to_int(code, dim: int) -> int:
    return int.from_bytes(pack_code(code, dim).tobytes(), "little")


def save_codebook(codebook: BinaryCodebook, path: str | Path) -> None:
    header = struct.pack(
        "<4sIQI", _CODEBOOK_MAGIC, _CODEBOOK_VERSION, codebook.num_nodes, codebook.dim
    )
    with atomic_open(path, "wb") as out:
        out.write(header)
        out.write(codebook.codes.tobytes())


def load_codebook(path: str | Path) -> BinaryCodebook:
    raw = Path(path).read_bytes()
    head = struct.calcsize("<4sIQI")
    if len(raw) < head:
        raise DataError(f"{path}: truncated codebook")
    magic, version, n, d, = struct.unpack_from("<4sIQI", raw)
    if magic != _CODEBOOK_MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}")
    if version != _CODEBOOK_VERSION:
        raise DataError(f"{path}: unsupported codebook version {version}")
    nbytes = (d + 7) // 8
    if len(raw) != head + n * nbytes:
        raise DataError(f"{path}: expected {head + n * nbytes} bytes, found {len(raw)}")
    codes = np.frombuffer(raw, dtype=np.uint8, offset=head).reshape(n, nbytes)
    return BinaryCodebook(d, codes.copy())
