"""Bit-packed linear algebra over GF(2).

Vectors and matrices are immutable. A BitVector stores its bits in a single
Python int (bit i of ``bits`` is coordinate i), so XOR and popcount are
word-parallel regardless of length. All row/column indices are 0-based.
"""

from __future__ import annotations

from typing import Iterable, NamedTuple, Optional


class BitVector:
    __slots__ = ("length", "bits")

    def __init__(self, length: int, bits: int = 0):
        if length < 0:
            raise ValueError("negative length")
        if bits < 0 or bits >> length:
            raise ValueError("bits outside of vector length")
        object.__setattr__(self, "length", length)
        object.__setattr__(self, "bits", bits)

    def __setattr__(self, name, value):
        raise AttributeError("BitVector is immutable")

    @classmethod
    def from_support(cls, length: int, support: Iterable[int]) -> "BitVector":
        bits = 0
        for q in support:
            if not 0 <= q < length:
                raise ValueError(f"support index {q} out of range")
            bits |= 1 << q
        return cls(length, bits)

    @classmethod
    def from_string(cls, s: str) -> "BitVector":
        """Parse '1' as one; '.' or '0' as zero. Index 0 is the leftmost char."""
        bits = 0
        for i, ch in enumerate(s):
            if ch == "1":
                bits |= 1 << i
            elif ch not in ".0":
                raise ValueError(f"bad character {ch!r} in bit string")
        return cls(len(s), bits)

    @classmethod
    def zeros(cls, length: int) -> "BitVector":
        return cls(length)

    def get(self, i: int) -> int:
        if not 0 <= i < self.length:
            raise IndexError(i)
        return (self.bits >> i) & 1

    def weight(self) -> int:
        return self.bits.bit_count()

    def support(self) -> tuple:
        return tuple(i for i in range(self.length) if (self.bits >> i) & 1)

    def to_string(self, zero: str = ".") -> str:
        return "".join("1" if (self.bits >> i) & 1 else zero for i in range(self.length))

    def is_zero(self) -> bool:
        return self.bits == 0

    def __xor__(self, other: "BitVector") -> "BitVector":
        if self.length != other.length:
            raise ValueError("length mismatch")
        return BitVector(self.length, self.bits ^ other.bits)

    def __and__(self, other: "BitVector") -> "BitVector":
        if self.length != other.length:
            raise ValueError("length mismatch")
        return BitVector(self.length, self.bits & other.bits)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, BitVector)
            and self.length == other.length
            and self.bits == other.bits
        )

    def __hash__(self):
        return hash((self.length, self.bits))

    def __len__(self):
        return self.length

    def __repr__(self):
        return f"BitVector({self.length}, 0b{self.bits:0{max(self.length, 1)}b})"


def inner(u: BitVector, v: BitVector) -> int:
    """Binary inner product u . v mod 2."""
    if u.length != v.length:
        raise ValueError("length mismatch")
    return (u.bits & v.bits).bit_count() & 1


class BitMatrix:
    """Immutable row-major matrix over GF(2); rows are BitVectors."""

    __slots__ = ("nrows", "ncols", "rows")

    def __init__(self, ncols: int, rows: Iterable[BitVector]):
        rows = tuple(rows)
        for r in rows:
            if r.length != ncols:
                raise ValueError("row length mismatch")
        object.__setattr__(self, "nrows", len(rows))
        object.__setattr__(self, "ncols", ncols)
        object.__setattr__(self, "rows", rows)

    def __setattr__(self, name, value):
        raise AttributeError("BitMatrix is immutable")

    @classmethod
    def from_strings(cls, strings: Iterable[str]) -> "BitMatrix":
        rows = [BitVector.from_string(s) for s in strings]
        if not rows:
            raise ValueError("cannot infer width from zero rows")
        return cls(rows[0].length, rows)

    @classmethod
    def from_support_lists(cls, ncols: int, supports: Iterable[Iterable[int]]) -> "BitMatrix":
        return cls(ncols, [BitVector.from_support(ncols, s) for s in supports])

    @classmethod
    def zeros(cls, nrows: int, ncols: int) -> "BitMatrix":
        return cls(ncols, [BitVector(ncols) for _ in range(nrows)])

    @classmethod
    def identity(cls, n: int) -> "BitMatrix":
        return cls(n, [BitVector(n, 1 << i) for i in range(n)])

    def row(self, i: int) -> BitVector:
        return self.rows[i]

    def row_masks(self) -> tuple:
        return tuple(r.bits for r in self.rows)

    def to_strings(self, zero: str = ".") -> list:
        return [r.to_string(zero) for r in self.rows]

    def stack(self, other: "BitMatrix") -> "BitMatrix":
        if self.ncols != other.ncols:
            raise ValueError("width mismatch")
        return BitMatrix(self.ncols, self.rows + other.rows)

    def transpose(self) -> "BitMatrix":
        cols = []
        for j in range(self.ncols):
            bits = 0
            for i, r in enumerate(self.rows):
                bits |= ((r.bits >> j) & 1) << i
            cols.append(BitVector(self.nrows, bits))
        return BitMatrix(self.nrows, cols)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, BitMatrix)
            and self.ncols == other.ncols
            and self.rows == other.rows
        )

    def __hash__(self):
        return hash((self.ncols, self.rows))

    def __repr__(self):
        return f"BitMatrix({self.nrows}x{self.ncols})"


class RrefResult(NamedTuple):
    reduced: BitMatrix
    pivots: tuple
    rank: int


def rref(m: BitMatrix) -> RrefResult:
    """Reduced row echelon form.

    Shape is preserved: zero rows stay (moved to the bottom), so an all-zero
    matrix reduces to itself. Pivot columns increase from the top row down.
    """
    rows = [r.bits for r in m.rows]
    pivots = []
    r = 0
    for c in range(m.ncols):
        sel = None
        for i in range(r, len(rows)):
            if (rows[i] >> c) & 1:
                sel = i
                break
        if sel is None:
            continue
        rows[r], rows[sel] = rows[sel], rows[r]
        for i in range(len(rows)):
            if i != r and (rows[i] >> c) & 1:
                rows[i] ^= rows[r]
        pivots.append(c)
        r += 1
        if r == len(rows):
            break
    reduced = BitMatrix(m.ncols, [BitVector(m.ncols, b) for b in rows])
    return RrefResult(reduced, tuple(pivots), r)


def rank(m: BitMatrix) -> int:
    return rref(m).rank


def in_row_space(m: BitMatrix, v: BitVector) -> Optional[BitVector]:
    """Coefficients c with c . m == v, or None if v is outside the row space.

    The returned BitVector has length m.nrows; when several solutions exist
    (rank-deficient m) the one using only pivot rows of the elimination is
    returned.
    """
    if v.length != m.ncols:
        raise ValueError("length mismatch")
    # eliminate on rows augmented with unit coefficient tags
    aug = []  # (row bits, coefficient bits)
    for i, row in enumerate(m.rows):
        aug.append([row.bits, 1 << i])
    pivots = {}  # col -> aug index
    for entry in aug:
        for c in range(m.ncols):
            if not (entry[0] >> c) & 1:
                continue
            if c in pivots:
                other = pivots[c]
                entry[0] ^= other[0]
                entry[1] ^= other[1]
            else:
                pivots[c] = entry
                break
    residual = v.bits
    coeff = 0
    for c in sorted(pivots):
        if (residual >> c) & 1:
            residual ^= pivots[c][0]
            coeff ^= pivots[c][1]
    if residual:
        return None
    return BitVector(m.nrows, coeff)


def kernel_basis(m: BitMatrix) -> BitMatrix:
    """Basis of {x : m . x^T == 0}; always ncols - rank rows."""
    red, pivots, r = rref(m)
    free = [c for c in range(m.ncols) if c not in pivots]
    basis = []
    for f in free:
        bits = 1 << f
        for i, p in enumerate(pivots):
            if (red.rows[i].bits >> f) & 1:
                bits |= 1 << p
        basis.append(BitVector(m.ncols, bits))
    return BitMatrix(m.ncols, basis)


def matmul_transpose(a: BitMatrix, b: BitMatrix) -> BitMatrix:
    """a . b^T as a BitMatrix of shape (a.nrows, b.nrows)."""
    if a.ncols != b.ncols:
        raise ValueError("width mismatch")
    out = []
    for ra in a.rows:
        bits = 0
        for j, rb in enumerate(b.rows):
            bits |= ((ra.bits & rb.bits).bit_count() & 1) << j
        out.append(BitVector(b.nrows, bits))
    return BitMatrix(b.nrows, out)


def row_space_masks(m: BitMatrix) -> list:
    """All 2^rank elements of the row space as int masks (sorted)."""
    red, _, r = rref(m)
    if r > 24:
        raise ValueError("row space too large to enumerate")
    basis = [red.rows[i].bits for i in range(r)]
    span = [0]
    for b in basis:
        span += [x ^ b for x in span]
    return sorted(span)
