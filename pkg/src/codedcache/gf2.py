"""Bit-packed linear algebra over GF(2).

Vectors are stored as Python integers: logical position ``i`` is bit ``i`` of
the integer (least significant bit first).  String renderings list position 0
first, so ``BitVector.from_str("1100")`` has bits 0 and 1 set.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np
from numba import njit

from .errors import ContractViolation

WORD_BITS = 64


@dataclass(frozen=True)
class BitVector:
    length: int
    bits: int = 0

    def __post_init__(self) -> None:
        if self.length < 0:
            raise ContractViolation(f"negative length {self.length}")
        if self.bits < 0 or self.bits >> self.length:
            raise ContractViolation("bits set beyond the logical length")

    @classmethod
    def zeros(cls, length: int) -> BitVector:
        return cls(length, 0)

    @classmethod
    def ones(cls, length: int) -> BitVector:
        return cls(length, (1 << length) - 1)

    @classmethod
    def unit(cls, length: int, position: int) -> BitVector:
        if not 0 <= position < length:
            raise ContractViolation(f"position {position} outside [0, {length})")
        return cls(length, 1 << position)

    @classmethod
    def from_str(cls, text: str) -> BitVector:
        text = text.strip()
        if any(ch not in "01" for ch in text):
            raise ContractViolation(f"not a bit string: {text!r}")
        bits = 0
        for i, ch in enumerate(text):
            if ch == "1":
                bits |= 1 << i
        return cls(len(text), bits)

    @classmethod
    def from_bits(cls, values: Iterable[int]) -> BitVector:
        values = list(values)
        bits = 0
        for i, v in enumerate(values):
            if v:
                bits |= 1 << i
        return cls(len(values), bits)

    @classmethod
    def from_bytes(cls, data: bytes, length: int | None = None) -> BitVector:
        """Little-endian: bit ``k`` lives in byte ``k // 8`` at bit ``k % 8``."""
        length = 8 * len(data) if length is None else length
        if length > 8 * len(data):
            raise ContractViolation("not enough bytes for requested length")
        bits = int.from_bytes(data, "little") & ((1 << length) - 1)
        return cls(length, bits)

    @classmethod
    def from_hex(cls, text: str, length: int) -> BitVector:
        return cls(length, int(text, 16) if text else 0)

    def to_str(self) -> str:
        return "".join("1" if (self.bits >> i) & 1 else "0" for i in range(self.length))

    def to_bytes(self) -> bytes:
        return self.bits.to_bytes((self.length + 7) // 8, "little")

    def to_hex(self) -> str:
        return format(self.bits, f"0{(self.length + 3) // 4}x") if self.length else ""

    def weight(self) -> int:
        return self.bits.bit_count()

    def support(self) -> list[int]:
        return [i for i in range(self.length) if (self.bits >> i) & 1]

    def __getitem__(self, position: int) -> int:
        if not 0 <= position < self.length:
            raise IndexError(position)
        return (self.bits >> position) & 1

    def __iter__(self) -> Iterator[int]:
        return ((self.bits >> i) & 1 for i in range(self.length))

    def __len__(self) -> int:
        return self.length

    def __bool__(self) -> bool:
        return self.bits != 0

    def __xor__(self, other: BitVector) -> BitVector:
        if not isinstance(other, BitVector):
            return NotImplemented
        if other.length != self.length:
            raise ContractViolation(f"length mismatch: {self.length} vs {other.length}")
        return BitVector(self.length, self.bits ^ other.bits)

    def __repr__(self) -> str:
        shown = self.to_str() if self.length <= 64 else f"0x{self.to_hex()}"
        return f"BitVector({self.length}, {shown})"


@dataclass(frozen=True)
class BitMatrix:
    """An ordered list of equal-length rows; ``width`` is kept for empty matrices."""

    rows: tuple[BitVector, ...]
    width: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "rows", tuple(self.rows))
        for row in self.rows:
            if row.length != self.width:
                raise ContractViolation(f"row of length {row.length} in width-{self.width} matrix")

    @classmethod
    def from_rows(cls, rows: Sequence[BitVector], width: int | None = None) -> BitMatrix:
        if width is None:
            if not rows:
                raise ContractViolation("width required for an empty matrix")
            width = rows[0].length
        return cls(tuple(rows), width)

    @classmethod
    def from_strs(cls, rows: Sequence[str], width: int | None = None) -> BitMatrix:
        return cls.from_rows([BitVector.from_str(r) for r in rows], width)

    @classmethod
    def identity(cls, size: int) -> BitMatrix:
        return cls(tuple(BitVector.unit(size, i) for i in range(size)), size)

    @property
    def row_count(self) -> int:
        return len(self.rows)

    def swap_rows(self, i: int, j: int) -> BitMatrix:
        rows = list(self.rows)
        rows[i], rows[j] = rows[j], rows[i]
        return BitMatrix(tuple(rows), self.width)

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self) -> Iterator[BitVector]:
        return iter(self.rows)


class EchelonBasis:
    """Incremental row echelon form over raw integer bit patterns.

    Rows are absorbed in insertion order.  A reduced row's pivot is its lowest
    set bit, and reduction always clears the lowest bit first, so each step can
    only push the leading bit upward.  With ``track=True`` every basis entry
    carries the mask of inserted rows (by insertion index) that XOR to it.
    """

    __slots__ = ("width", "track", "inserted", "_pivots")

    def __init__(self, width: int, track: bool = False) -> None:
        self.width = width
        self.track = track
        self.inserted = 0
        self._pivots: dict[int, tuple[int, int]] = {}

    @property
    def rank(self) -> int:
        return len(self._pivots)

    @property
    def full(self) -> bool:
        return len(self._pivots) == self.width

    def reduce(self, bits: int) -> tuple[int, int]:
        """Return ``(residual, mask)``; residual is 0 iff ``bits`` is in the span."""
        pivots = self._pivots
        mask = 0
        while bits:
            entry = pivots.get(bits & -bits)
            if entry is None:
                break
            bits ^= entry[0]
            mask ^= entry[1]
        return bits, mask

    def add(self, bits: int) -> bool:
        """Insert a row; returns True when it was linearly independent."""
        if bits >> self.width:
            raise ContractViolation("row wider than basis")
        index = self.inserted
        self.inserted += 1
        pivots = self._pivots
        if self.track:
            residual, mask = self.reduce(bits)
            if residual:
                pivots[residual & -residual] = (residual, mask ^ (1 << index))
                return True
            return False
        while bits:
            low = bits & -bits
            entry = pivots.get(low)
            if entry is None:
                pivots[low] = (bits, 0)
                return True
            bits ^= entry[0]
        return False

    def contains(self, bits: int) -> bool:
        return self.reduce(bits)[0] == 0

    def represent(self, bits: int) -> int | None:
        """Mask of inserted rows whose XOR equals ``bits``, or None if outside the span."""
        if not self.track:
            raise ContractViolation("basis built without combination tracking")
        residual, mask = self.reduce(bits)
        return None if residual else mask


def rank(matrix: BitMatrix) -> int:
    basis = EchelonBasis(matrix.width)
    for row in matrix.rows:
        basis.add(row.bits)
        if basis.full:
            break
    return basis.rank


def solve(basis: BitMatrix, target: BitVector) -> BitVector | None:
    """Coefficients ``c`` with XOR of rows selected by ``c`` equal to ``target``.

    Rows are eliminated in input order with the lowest set bit as pivot; rows
    that were dependent on earlier rows always get coefficient 0, which pins the
    answer for underdetermined systems.
    """
    if target.length != basis.width:
        raise ContractViolation(f"target length {target.length} != row length {basis.width}")
    echelon = EchelonBasis(basis.width, track=True)
    for row in basis.rows:
        echelon.add(row.bits)
    mask = echelon.represent(target.bits)
    if mask is None:
        return None
    return BitVector(basis.row_count, mask)


def xor_combine(vectors: Sequence[BitVector], coefficients: BitVector, length: int | None = None) -> BitVector:
    """XOR of the vectors picked by 1-coefficients.

    ``length`` is only needed when ``vectors`` is empty.
    """
    if coefficients.length != len(vectors):
        raise ContractViolation(f"{coefficients.length} coefficients for {len(vectors)} vectors")
    if vectors:
        length = vectors[0].length
    elif length is None:
        raise ContractViolation("length required for an empty combination")
    acc = 0
    sel = coefficients.bits
    for i, vec in enumerate(vectors):
        if vec.length != length:
            raise ContractViolation("vectors of unequal length")
        if (sel >> i) & 1:
            acc ^= vec.bits
    return BitVector(length, acc)


def xor_masked(values: Sequence[int], mask: int) -> int:
    """XOR of raw integers selected by the set bits of ``mask``."""
    acc = 0
    while mask:
        low = mask & -mask
        acc ^= values[low.bit_length() - 1]
        mask ^= low
    return acc


# Vectorised rank for Monte Carlo batches -----------------------------------


def pack_words(rows: Sequence[int], width: int) -> np.ndarray:
    """Pack integer rows into a ``(len(rows), ceil(width/64))`` uint64 array."""
    words = max(1, -(-width // WORD_BITS))
    data = b"".join(int(bits).to_bytes(8 * words, "little") for bits in rows)
    return np.frombuffer(data, dtype="<u8").astype(np.uint64).reshape(len(rows), words)


def random_words(rng: np.random.Generator, shape: tuple[int, ...], width: int) -> np.ndarray:
    """Uniform random rows of ``width`` bits packed as uint64, trailing dim = words."""
    words = max(1, -(-width // WORD_BITS))
    out = rng.integers(0, np.iinfo(np.uint64).max, size=(*shape, words), dtype=np.uint64, endpoint=True)
    spare = words * WORD_BITS - width
    if spare:
        out[..., -1] &= np.uint64((1 << (WORD_BITS - spare)) - 1)
    return out


def _check_batch(rows: np.ndarray, width: int) -> np.ndarray:
    if rows.ndim != 3 or rows.dtype != np.uint64:
        raise ContractViolation("expected a (batch, rows, words) uint64 array")
    if rows.shape[2] * WORD_BITS < width:
        raise ContractViolation("not enough words for the requested width")
    return np.ascontiguousarray(rows)


def batch_rank(rows: np.ndarray, width: int) -> np.ndarray:
    """GF(2) rank of each matrix in a ``(batch, rows, words)`` uint64 array."""
    rows = _check_batch(rows, width)
    ranks, _ = _prefix_rank_kernel(rows, width, np.array([rows.shape[1]], dtype=np.int64))
    return ranks[:, 0]


def prefix_ranks(rows: np.ndarray, width: int, prefixes: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Rank of the first ``k`` rows for each ``k`` in ``prefixes``, per batch entry.

    Also returns, per entry, how many rows it took to reach rank ``width``
    (-1 if never reached).
    """
    rows = _check_batch(rows, width)
    cuts = np.asarray(prefixes, dtype=np.int64)
    if cuts.size and (np.any(np.diff(cuts) < 0) or cuts[0] < 0 or cuts[-1] > rows.shape[1]):
        raise ContractViolation("prefixes must be sorted and within the row count")
    return _prefix_rank_kernel(rows, width, cuts)


@njit(cache=True)
def _prefix_rank_kernel(rows, width, cuts):  # pragma: no cover - compiled
    batch, nrows, nwords = rows.shape
    ncuts = cuts.shape[0]
    ranks = np.zeros((batch, ncuts), dtype=np.int64)
    full_at = np.full(batch, -1, dtype=np.int64)
    basis = np.zeros((max(width, 1), nwords), dtype=np.uint64)
    has = np.zeros(max(width, 1), dtype=np.bool_)
    row = np.zeros(nwords, dtype=np.uint64)
    for t in range(batch):
        has[:] = False
        r = 0
        c = 0
        while c < ncuts and cuts[c] == 0:
            c += 1
        for i in range(nrows):
            if r < width:
                for k in range(nwords):
                    row[k] = rows[t, i, k]
                # pivots are lowest set bits, so one upward column sweep reduces fully
                for col in range(width):
                    w = col // 64
                    bit = np.uint64(1) << np.uint64(col % 64)
                    if row[w] & bit:
                        if has[col]:
                            for k in range(w, nwords):
                                row[k] ^= basis[col, k]
                        else:
                            for k in range(nwords):
                                basis[col, k] = row[k]
                            has[col] = True
                            r += 1
                            if r == width:
                                full_at[t] = i + 1
                            break
            while c < ncuts and cuts[c] == i + 1:
                ranks[t, c] = r
                c += 1
            if c == ncuts and r == width:
                break
        while c < ncuts:
            ranks[t, c] = r
            c += 1
    return ranks, full_at
