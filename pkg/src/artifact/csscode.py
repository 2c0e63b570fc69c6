"""CSS code data model, error reduction groups, catalog, lookup decoding.

An X-type data error is only meaningful modulo the X-type stabilizers; a
Z-type error on the logical-zero state is meaningful modulo the Z-type
stabilizers together with the Z logicals (which stabilize that state).
ReductionGroup captures either choice and answers coset-minimum-weight
queries from a precomputed table.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .f2core import (
    BitMatrix,
    BitVector,
    in_row_space,
    inner,
    kernel_basis,
    rank,
    rref,
)

_PC16 = None


def _popcount_u32(a):
    global _PC16
    if _PC16 is None:
        _PC16 = np.array([bin(i).count("1") for i in range(1 << 16)], dtype=np.uint8)
    a = np.asarray(a, dtype=np.uint32)
    return (_PC16[a & 0xFFFF] + _PC16[(a >> np.uint32(16)) & 0xFFFF]).astype(np.uint32)


class PauliKind(enum.Enum):
    X = "X"
    Z = "Z"

    def dual(self) -> "PauliKind":
        return PauliKind.Z if self is PauliKind.X else PauliKind.X


class ReductionGroup:
    """Span of a generator matrix, with fast coset weight/representative lookup.

    For widths up to 16 a full table over all 2^n masks is built once; larger
    widths fall back to enumerating the 2^rank span (guarded at rank 20).
    """

    _TABLE_WIDTH_LIMIT = 16
    _RANK_LIMIT = 20

    def __init__(self, generators: BitMatrix):
        self.generators = generators
        self.n = generators.ncols
        red, _, r = rref(generators)
        self.rank = r
        self._basis = [red.rows[i].bits for i in range(r)]
        self._functionals = [v.bits for v in kernel_basis(generators).rows]
        self._lab = None
        self._best = None
        if self.rank > self._RANK_LIMIT:
            raise ValueError("reduction group rank exceeds enumeration guard")

    def _ensure_table(self):
        if self._lab is not None or self.n > self._TABLE_WIDTH_LIMIT:
            return
        size = 1 << self.n
        masks = np.arange(size, dtype=np.uint32)
        w = _popcount_u32(masks)
        lab = np.zeros(size, dtype=np.uint32)
        for i, f in enumerate(self._functionals):
            lab |= (_popcount_u32(masks & np.uint32(f)) & np.uint32(1)) << np.uint32(i)
        packed = (w.astype(np.uint64) << np.uint64(32)) | masks.astype(np.uint64)
        best = np.full(1 << len(self._functionals), np.iinfo(np.uint64).max, dtype=np.uint64)
        np.minimum.at(best, lab, packed)
        self._lab = lab
        self._best = best

    def _span_masks(self):
        span = [0]
        for b in self._basis:
            span += [x ^ b for x in span]
        return span

    def label(self, e: BitVector) -> int:
        """Coset label of e: parities against the annihilator functionals."""
        self._check(e)
        out = 0
        for i, f in enumerate(self._functionals):
            out |= ((e.bits & f).bit_count() & 1) << i
        return out

    def contains(self, e: BitVector) -> bool:
        return self.label(e) == 0

    def reduced_weight(self, e: BitVector) -> int:
        self._check(e)
        self._ensure_table()
        if self._lab is not None:
            return int(self._best[self._lab[e.bits]] >> np.uint64(32))
        return min((e.bits ^ s).bit_count() for s in self._span_masks())

    def canonical(self, e: BitVector) -> BitVector:
        """Minimum-weight element of e's coset; ties broken by smallest mask."""
        self._check(e)
        self._ensure_table()
        if self._lab is not None:
            return BitVector(self.n, int(self._best[self._lab[e.bits]] & np.uint64(0xFFFFFFFF)))
        best = min(((e.bits ^ s).bit_count(), e.bits ^ s) for s in self._span_masks())
        return BitVector(self.n, best[1])

    def _check(self, e: BitVector):
        if e.length != self.n:
            raise ValueError("vector width does not match group")

    def __repr__(self):
        return f"ReductionGroup(n={self.n}, rank={self.rank})"


def reduced_weight(e: BitVector, g: ReductionGroup) -> int:
    return g.reduced_weight(e)


def canonical_representative(e: BitVector, g: ReductionGroup) -> BitVector:
    return g.canonical(e)


@dataclass(frozen=True)
class CssCode:
    name: str
    n: int
    k: int
    d: int
    hx: BitMatrix
    hz: BitMatrix
    lx: BitMatrix
    lz: BitMatrix

    def reduction_group(self, kind: PauliKind, mode: str = "state") -> ReductionGroup:
        """Group an error of the given Pauli kind is reduced against.

        mode 'state': Z errors additionally reduce by the Z logicals, which
        act trivially on the logical-zero state. mode 'code': stabilizers
        only. X errors always reduce by the X stabilizers alone, since X
        logicals flip the prepared state.
        """
        if mode not in ("state", "code"):
            raise ValueError(f"unknown reduction mode {mode!r}")
        if kind is PauliKind.X:
            return ReductionGroup(self.hx)
        if mode == "state":
            return ReductionGroup(self.hz.stack(self.lz))
        return ReductionGroup(self.hz)

    def checks_detecting(self, kind: PauliKind) -> BitMatrix:
        """Stabilizer checks whose outcome is flipped by errors of `kind`."""
        return self.hz if kind is PauliKind.X else self.hx


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violation: Optional[str] = None
    detail: str = ""

    def __bool__(self):
        return self.ok


def validate(code: CssCode) -> ValidationReport:
    """Check all structural invariants; reports the first violation found."""

    def bad(name, detail):
        return ValidationReport(False, name, detail)

    n, k = code.n, code.k
    for mat, nm in ((code.hx, "hx"), (code.hz, "hz"), (code.lx, "lx"), (code.lz, "lz")):
        if mat.ncols != n:
            return bad("shape", f"{nm} has width {mat.ncols}, expected {n}")
    if code.lx.nrows != k or code.lz.nrows != k:
        return bad("shape", f"logical row count != k={k}")
    for i, rx_row in enumerate(code.hx.rows):
        for j, rz_row in enumerate(code.hz.rows):
            if inner(rx_row, rz_row):
                return bad("commutation", f"hx row {i} anticommutes with hz row {j}")
    rx, rz = rank(code.hx), rank(code.hz)
    if rx + rz != n - k:
        return bad("rank", f"rank(hx)+rank(hz) = {rx}+{rz} != n-k = {n - k}")
    for i, lrow in enumerate(code.lx.rows):
        for j, zrow in enumerate(code.hz.rows):
            if inner(lrow, zrow):
                return bad("logical-commutation", f"lx row {i} anticommutes with hz row {j}")
    for i, lrow in enumerate(code.lz.rows):
        for j, xrow in enumerate(code.hx.rows):
            if inner(lrow, xrow):
                return bad("logical-commutation", f"lz row {i} anticommutes with hx row {j}")
    for i in range(k):
        for j in range(k):
            want = 1 if i == j else 0
            if inner(code.lx.row(i), code.lz.row(j)) != want:
                return bad("logical-pairing", f"inner(lx_{i}, lz_{j}) != {want}")
    for i, lrow in enumerate(code.lx.rows):
        if in_row_space(code.hx, lrow) is not None:
            return bad("logical-in-stabilizer", f"lx row {i} lies in rowspace(hx)")
    for i, lrow in enumerate(code.lz.rows):
        if in_row_space(code.hz, lrow) is not None:
            return bad("logical-in-stabilizer", f"lz row {i} lies in rowspace(hz)")
    dd = distance(code)
    if dd != code.d:
        return bad("distance", f"computed distance {dd} != declared {code.d}")
    return ValidationReport(True)


def derive_logicals(hx: BitMatrix, hz: BitMatrix) -> tuple:
    """Symplectically paired logical operators for a CSS check pair.

    Returns (lx, lz) with inner(lx_i, lz_j) = delta_ij. Rows are reduced to
    minimum-weight coset representatives of their stabilizer group, which
    keeps the output deterministic and readable.
    """
    n = hx.ncols
    k = n - rank(hx) - rank(hz)
    lx_rows = _quotient_basis(kernel_basis(hz), hx, k)
    lz_rows = _quotient_basis(kernel_basis(hx), hz, k)
    if len(lx_rows) != k or len(lz_rows) != k:
        raise ValueError("could not extract a full logical basis")
    # fix the pairing: P_ij = <lx_i, lz_j> is invertible on the quotient
    p = [[inner(lx_rows[i], lz_rows[j]) for j in range(k)] for i in range(k)]
    a = _gf2_inverse_transpose(p)
    new_lz = []
    for j in range(k):
        acc = BitVector(n)
        for m in range(k):
            if a[j][m]:
                acc = acc ^ lz_rows[m]
        new_lz.append(acc)
    gx = ReductionGroup(hx)
    gz = ReductionGroup(hz)
    lx = BitMatrix(n, [gx.canonical(v) for v in lx_rows])
    lz = BitMatrix(n, [gz.canonical(v) for v in new_lz])
    return lx, lz


def _quotient_basis(ambient: BitMatrix, stab: BitMatrix, k: int) -> list:
    chosen = []
    current = stab
    for row in ambient.rows:
        if in_row_space(current, row) is None:
            chosen.append(row)
            current = current.stack(BitMatrix(current.ncols, [row]))
            if len(chosen) == k:
                break
    return chosen


def _gf2_inverse_transpose(p):
    """(P^-1)^T for a small GF(2) matrix given as nested lists."""
    k = len(p)
    m = [row[:] + [1 if i == j else 0 for j in range(k)] for i, row in enumerate(p)]
    r = 0
    for c in range(k):
        sel = next((i for i in range(r, k) if m[i][c]), None)
        if sel is None:
            raise ValueError("pairing matrix is singular")
        m[r], m[sel] = m[sel], m[r]
        for i in range(k):
            if i != r and m[i][c]:
                m[i] = [(x + y) % 2 for x, y in zip(m[i], m[r])]
        r += 1
    inv = [row[k:] for row in m]
    return [[inv[j][i] for j in range(k)] for i in range(k)]  # transpose


def type_distances(code: CssCode) -> tuple:
    """(dX, dZ): minimum weights of X-type and Z-type logical operators."""
    gx = ReductionGroup(code.hx)
    gz = ReductionGroup(code.hz)
    dx = _logical_min_weight(code.lx, gx)
    dz = _logical_min_weight(code.lz, gz)
    return dx, dz


def _logical_min_weight(logicals: BitMatrix, g: ReductionGroup) -> int:
    best = None
    k = logicals.nrows
    for combo in range(1, 1 << k):
        e = BitVector(logicals.ncols)
        for i in range(k):
            if (combo >> i) & 1:
                e = e ^ logicals.row(i)
        w = g.reduced_weight(e)
        best = w if best is None else min(best, w)
    return best


def distance(code: CssCode) -> int:
    dx, dz = type_distances(code)
    return min(dx, dz)


def residual_weight_limits(code: CssCode) -> tuple:
    """(max_wx, max_wz): per-type residual weights still correctable later.

    With per-type distances dX, dZ, a round of error correction tolerates
    t = (min(dX,dZ)-1)//2 faults; a residual X error of weight up to
    ((dX-1)//2)//t consumes at most one fault's worth of the X budget, and
    likewise for Z. Both limits are floored at 1.
    """
    dx, dz = type_distances(code)
    t = max((min(dx, dz) - 1) // 2, 1)
    max_wx = max(((dx - 1) // 2) // t, 1)
    max_wz = max(((dz - 1) // 2) // t, 1)
    return max_wx, max_wz


class LookupDecoder:
    """Minimum-weight syndrome table for one error kind."""

    def __init__(self, code: CssCode, kind: PauliKind):
        self.kind = kind
        self.checks = code.checks_detecting(kind)
        self.n = code.n
        self.table = {}
        reachable = 1 << rank(self.checks)
        masks = self.checks.row_masks()
        # increasing weight, lexicographic within a weight: first fill wins
        import itertools

        for w in range(self.n + 1):
            if len(self.table) == reachable:
                break
            for support in itertools.combinations(range(self.n), w):
                bits = 0
                for q in support:
                    bits |= 1 << q
                syn = 0
                for i, m in enumerate(masks):
                    syn |= ((m & bits).bit_count() & 1) << i
                if syn not in self.table:
                    self.table[syn] = BitVector(self.n, bits)
                    if len(self.table) == reachable:
                        break

    def syndrome_of(self, e: BitVector) -> int:
        syn = 0
        for i, m in enumerate(self.checks.row_masks()):
            syn |= ((m & e.bits).bit_count() & 1) << i
        return syn

    def decode(self, syndrome: int) -> BitVector:
        if syndrome not in self.table:
            raise KeyError(f"syndrome {syndrome:b} not reachable by any error")
        return self.table[syndrome]


def build_lookup_decoder(code: CssCode, kind: PauliKind) -> LookupDecoder:
    return LookupDecoder(code, kind)


# ---------------------------------------------------------------------------
# catalog


def _tetra_point_rows(pair_products: bool) -> list:
    # qubit i corresponds to the nonzero 4-bit point i+1
    rows = []
    for b in range(4):
        rows.append([i for i in range(15) if ((i + 1) >> b) & 1])
    if pair_products:
        for a in range(4):
            for b in range(a + 1, 4):
                rows.append(
                    [i for i in range(15) if ((i + 1) >> a) & 1 and ((i + 1) >> b) & 1]
                )
    return rows


def _hamming15_rows() -> list:
    return [[i for i in range(15) if ((i + 1) >> b) & 1] for b in range(4)]


def _rm14_rows() -> list:
    rows = [list(range(16))]
    for b in range(4):
        rows.append([i for i in range(16) if (i >> b) & 1])
    return rows


_CATALOG_SPECS = {
    # [[7,1,3]]: smallest distance-3 CSS code with transversal Cliffords
    "steane": dict(
        n=7, k=1, d=3,
        hx=[[0, 1, 4, 5], [0, 2, 4, 6], [3, 4, 5, 6]],
        hz=[[0, 1, 4, 5], [0, 2, 4, 6], [3, 4, 5, 6]],
        lx=[[2, 3, 6]], lz=[[0, 1, 2]],
    ),
    # [[9,1,3]]: three blocks of three; Z checks are weight-2 in-block pairs
    "shor": dict(
        n=9, k=1, d=3,
        hx=[[0, 1, 2, 3, 4, 5], [3, 4, 5, 6, 7, 8]],
        hz=[[0, 1], [1, 2], [3, 4], [4, 5], [6, 7], [7, 8]],
        lx=[[0, 1, 2]], lz=[[0, 3, 6]],
    ),
    # [[9,1,3]] rotated surface patch, row-major qubit grid
    "surface9": dict(
        n=9, k=1, d=3,
        hx=[[0, 1, 3, 4], [4, 5, 7, 8], [6, 7], [1, 2]],
        hz=[[3, 4, 6, 7], [1, 2, 4, 5], [0, 3], [5, 8]],
        lx=[[0, 3, 6]], lz=[[0, 1, 2]],
    ),
    # [[15,1,3]] with asymmetric distances (7 against X, 3 against Z);
    # punctured length-15 geometry: qubit i is the nonzero 4-bit point i+1
    "tetrahedral15": dict(
        n=15, k=1, d=3,
        hx=_tetra_point_rows(False),
        hz=_tetra_point_rows(True),
        lx=[list(range(7))], lz=[[0, 1, 2]],
    ),
    # [[15,7,3]] self-dual Hamming construction
    "hamming15": dict(
        n=15, k=7, d=3,
        hx=_hamming15_rows(), hz=_hamming15_rows(),
        lx=None, lz=None,
    ),
    # [[12,2,4]] derived by shortening the extended Hamming code: the X checks
    # span the dual of the shortened second-order code, the Z checks are the
    # subcode orthogonal to one of its heavy-coset lines
    "carbon12": dict(
        n=12, k=2, d=4,
        hx=["1111........", "....1111....", "11..11..11..", "1.1.1.1.1.1.", ".11..11.1..1"],
        hz=["....11111111", "1111....1111", "........1111", "..11.11..1.1", ".1.1..11.11."],
        lx=["1.1.11......", ".11.1.1....."],
        lz=["11..11......", ".11..11....."],
    ),
    # [[16,6,4]]: first-order length-16 Reed-Muller checks on both sides
    "tesseract16": dict(
        n=16, k=6, d=4,
        hx=_rm14_rows(), hz=_rm14_rows(),
        lx=None, lz=None,
    ),
    "c11_1_3": dict(
        n=11, k=1, d=3,
        hx=["1......1.11", "1111.1.11..", "...1.11.11.", "1....1..111", "1.1.1.11..1"],
        hz=[".11.111.111", ".1.11.1....", ".1.1.1.1..1", "..11.....11", "1.1..111..."],
        lx=None, lz=None,
    ),
    "c16_2_4": dict(
        n=16, k=2, d=4,
        hx=[".1.1....11..1..1", "11.111.1.1.1..11", "1.11..1..1.1....",
            "1.1..........11.", "11.1.11...1111.1", ".1.11.1.1111.11.",
            "..11....11111.1."],
        hz=[".1.1....11..1..1", "11.111.1.1.1..11", "1.11..1..1.1....",
            "1.1..........11.", "11.1.11...1111.1", ".1.11.1.1111.11.",
            "..11....11111.1."],
        lx=None, lz=None,
    ),
}

_catalog_cache = {}


def catalog_names() -> list:
    return list(_CATALOG_SPECS)


def _build_matrix(n, spec_rows) -> BitMatrix:
    if isinstance(spec_rows[0], str):
        return BitMatrix.from_strings(spec_rows)
    return BitMatrix.from_support_lists(n, spec_rows)


def catalog(name: str) -> CssCode:
    if name not in _CATALOG_SPECS:
        raise KeyError(f"unknown code {name!r}; known: {', '.join(catalog_names())}")
    if name in _catalog_cache:
        return _catalog_cache[name]
    s = _CATALOG_SPECS[name]
    n = s["n"]
    hx = _build_matrix(n, s["hx"])
    hz = _build_matrix(n, s["hz"])
    if s["lx"] is None:
        lx, lz = derive_logicals(hx, hz)
    else:
        lx = _build_matrix(n, s["lx"])
        lz = _build_matrix(n, s["lz"])
    code = CssCode(name, n, s["k"], s["d"], hx, hz, lx, lz)
    report = validate(code)
    if not report.ok:
        raise AssertionError(f"catalog code {name} invalid: {report.violation}: {report.detail}")
    _catalog_cache[name] = code
    return code


# ---------------------------------------------------------------------------
# JSON


def code_to_json(code: CssCode) -> dict:
    out = {
        "name": code.name,
        "n": code.n,
        "k": code.k,
        "d": code.d,
        "hx": code.hx.to_strings(),
        "hz": code.hz.to_strings(),
        "lx": code.lx.to_strings(),
        "lz": code.lz.to_strings(),
    }
    return out


def code_from_json(d: dict) -> CssCode:
    n = int(d["n"])
    hx = BitMatrix.from_strings(d["hx"])
    hz = BitMatrix.from_strings(d["hz"])
    if hx.ncols != n or hz.ncols != n:
        raise ValueError("check matrix width disagrees with n")
    if d.get("lx") and d.get("lz"):
        lx = BitMatrix.from_strings(d["lx"])
        lz = BitMatrix.from_strings(d["lz"])
    else:
        lx, lz = derive_logicals(hx, hz)
    code = CssCode(str(d.get("name", "custom")), n, int(d["k"]),
                   int(d["d"]) if "d" in d else 0, hx, hz, lx, lz)
    if "d" not in d:
        code = CssCode(code.name, code.n, code.k, distance(code), hx, hz, lx, lz)
    return code
