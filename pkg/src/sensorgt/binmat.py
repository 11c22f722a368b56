"""Dense GF(2) vectors and matrices backed by Python int bitsets.

Bit ``j`` of the underlying integer is position ``j`` of the vector, so a
vector of length ``n`` is an int in ``[0, 2**n)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class DimensionError(ValueError):
    pass


def _check_len(a: "BitVector", b: "BitVector") -> None:
    if a.length != b.length:
        raise DimensionError(f"length mismatch: {a.length} != {b.length}")


@dataclass(frozen=True, slots=True)
class BitVector:
    length: int
    bits: int = 0

    def __post_init__(self):
        if self.length < 0:
            raise ValueError("negative length")
        if self.bits < 0 or self.bits >> self.length:
            raise ValueError("bits exceed vector length")

    @classmethod
    def zeros(cls, length: int) -> "BitVector":
        return cls(length, 0)

    @classmethod
    def ones(cls, length: int) -> "BitVector":
        return cls(length, (1 << length) - 1)

    @classmethod
    def from_iterable(cls, values: Iterable[int]) -> "BitVector":
        bits = 0
        n = 0
        for n, v in enumerate(values, start=1):
            if v:
                bits |= 1 << (n - 1)
        return cls(n, bits)

    @classmethod
    def from_support(cls, length: int, support: Iterable[int]) -> "BitVector":
        bits = 0
        for j in support:
            if not 0 <= j < length:
                raise IndexError(j)
            bits |= 1 << j
        return cls(length, bits)

    @classmethod
    def from_array(cls, arr) -> "BitVector":
        arr = np.asarray(arr, dtype=bool)
        packed = np.packbits(arr, bitorder="little")
        return cls(arr.size, int.from_bytes(packed.tobytes(), "little"))

    def __len__(self) -> int:
        return self.length

    def __getitem__(self, j: int) -> int:
        if not 0 <= j < self.length:
            raise IndexError(j)
        return (self.bits >> j) & 1

    def __iter__(self):
        b = self.bits
        for _ in range(self.length):
            yield b & 1
            b >>= 1

    def __xor__(self, other: "BitVector") -> "BitVector":
        _check_len(self, other)
        return BitVector(self.length, self.bits ^ other.bits)

    def __and__(self, other: "BitVector") -> "BitVector":
        _check_len(self, other)
        return BitVector(self.length, self.bits & other.bits)

    def __or__(self, other: "BitVector") -> "BitVector":
        _check_len(self, other)
        return BitVector(self.length, self.bits | other.bits)

    def __invert__(self) -> "BitVector":
        return BitVector(self.length, ((1 << self.length) - 1) ^ self.bits)

    def popcount(self) -> int:
        return self.bits.bit_count()

    def any(self) -> bool:
        return self.bits != 0

    def support(self) -> list[int]:
        out = []
        b = self.bits
        while b:
            low = b & -b
            out.append(low.bit_length() - 1)
            b ^= low
        return out

    def to_list(self) -> list[int]:
        return list(self)

    def to_array(self) -> np.ndarray:
        return np.array(self.to_list(), dtype=bool)

    def hex(self) -> str:
        return format(self.bits, "x")

    def __str__(self) -> str:
        return "".join(str(b) for b in self)


@dataclass(frozen=True, slots=True)
class BitMatrix:
    """Row-major binary matrix; each row is an int bitset over ``cols``."""

    rows: tuple[int, ...]
    cols: int

    def __post_init__(self):
        limit = 1 << self.cols
        for r in self.rows:
            if r < 0 or r >= limit:
                raise DimensionError("row wider than matrix")

    @classmethod
    def empty(cls, cols: int) -> "BitMatrix":
        return cls((), cols)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]], cols: int | None = None) -> "BitMatrix":
        vecs = [BitVector.from_iterable(r) for r in rows]
        if cols is None:
            if not vecs:
                raise ValueError("cannot infer column count of an empty matrix")
            cols = vecs[0].length
        for v in vecs:
            if v.length != cols:
                raise DimensionError("ragged rows")
        return cls(tuple(v.bits for v in vecs), cols)

    @classmethod
    def from_vectors(cls, vectors: Sequence[BitVector], cols: int | None = None) -> "BitMatrix":
        if cols is None:
            if not vectors:
                raise ValueError("cannot infer column count of an empty matrix")
            cols = vectors[0].length
        for v in vectors:
            if v.length != cols:
                raise DimensionError("ragged rows")
        return cls(tuple(v.bits for v in vectors), cols)

    @classmethod
    def from_array(cls, arr) -> "BitMatrix":
        arr = np.atleast_2d(np.asarray(arr, dtype=bool))
        return cls(tuple(BitVector.from_array(r).bits for r in arr), arr.shape[1])

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.rows), self.cols)

    def row(self, i: int) -> BitVector:
        return BitVector(self.cols, self.rows[i])

    def column(self, j: int) -> BitVector:
        """Column ``j`` as a vector over the rows."""
        if not 0 <= j < self.cols:
            raise IndexError(j)
        bits = 0
        for i, r in enumerate(self.rows):
            if (r >> j) & 1:
                bits |= 1 << i
        return BitVector(len(self.rows), bits)

    def column_bits(self) -> list[int]:
        """Every column as an int bitset over the rows (a packed transpose)."""
        if not self.rows:
            return [0] * self.cols
        return pack_rows(unpack_rows(self.rows, self.cols).T)

    def columns(self) -> list[BitVector]:
        n = len(self.rows)
        return [BitVector(n, b) for b in self.column_bits()]

    def select_rows(self, idx: Iterable[int]) -> "BitMatrix":
        return BitMatrix(tuple(self.rows[i] for i in idx), self.cols)

    def to_array(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=bool)
        for i, r in enumerate(self.rows):
            out[i] = BitVector(self.cols, r).to_array()
        return out

    def to_text(self) -> str:
        return "\n".join(str(BitVector(self.cols, r)) for r in self.rows)

    @classmethod
    def from_text(cls, text: str) -> "BitMatrix":
        lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
        return cls.from_rows([[int(c) for c in ln] for ln in lines])


def boolean_mat_vec(W: BitMatrix, f: BitVector) -> BitVector:
    """Boolean product: ``g_i = OR_j (W_ij AND f_j)``."""
    if W.cols != f.length:
        raise DimensionError(f"matrix has {W.cols} columns, vector has length {f.length}")
    bits = 0
    for i, r in enumerate(W.rows):
        if r & f.bits:
            bits |= 1 << i
    return BitVector(W.n_rows, bits)


def xor(a: BitVector, b: BitVector) -> BitVector:
    return a ^ b


def hamming_distance(a: BitVector, b: BitVector) -> int:
    _check_len(a, b)
    return (a.bits ^ b.bits).bit_count()


def support_difference(a: BitVector, b: BitVector) -> int:
    """``|supp(a) \\ supp(b)|``: positions where a is 1 and b is 0."""
    _check_len(a, b)
    return (a.bits & ~b.bits).bit_count()


def _rank_of_ints(rows: Iterable[int]) -> int:
    acc = RankAccumulator()
    for r in rows:
        acc.add(r)
    return acc.rank


def gf2_rank(M: BitMatrix) -> int:
    return _rank_of_ints(M.rows)


class RankAccumulator:
    """Incremental GF(2) row basis keyed by leading bit.

    ``add`` returns True when the row was linearly independent of what has
    been seen so far (an innovative row).
    """

    __slots__ = ("_basis",)

    def __init__(self):
        self._basis: dict[int, int] = {}

    @property
    def rank(self) -> int:
        return len(self._basis)

    def reduce(self, row: int) -> int:
        basis = self._basis
        while row:
            lead = row.bit_length() - 1
            piv = basis.get(lead)
            if piv is None:
                return row
            row ^= piv
        return 0

    def add(self, row: int | BitVector) -> bool:
        if isinstance(row, BitVector):
            row = row.bits
        r = self.reduce(row)
        if r:
            self._basis[r.bit_length() - 1] = r
            return True
        return False

    def contains(self, row: int | BitVector) -> bool:
        if isinstance(row, BitVector):
            row = row.bits
        return self.reduce(row) == 0

    def copy(self) -> "RankAccumulator":
        out = RankAccumulator()
        out._basis = dict(self._basis)
        return out


def unpack_rows(rows: Sequence[int], cols: int) -> np.ndarray:
    """Bulk int-bitset rows -> (len(rows), cols) bool array."""
    nbytes = max(1, (cols + 7) // 8)
    buf = b"".join(r.to_bytes(nbytes, "little") for r in rows)
    arr = np.frombuffer(buf, dtype=np.uint8).reshape(len(rows), nbytes)
    return np.unpackbits(arr, axis=1, bitorder="little")[:, :cols].astype(bool)


def pack_rows(arr: np.ndarray) -> list[int]:
    """(n, cols) bool array -> list of int bitsets."""
    arr = np.asarray(arr, dtype=bool)
    packed = np.packbits(arr, axis=1, bitorder="little")
    return [int.from_bytes(row.tobytes(), "little") for row in packed]
