"""Circuit intermediate representation with Pauli-frame fault propagation.

Gates: PREPZ, PREPX, CNOT, MEASZ, MEASX, CORRX, CORRZ. Corrections carry a
classical condition over measurement bits; propagation ignores conditions
entirely since a conditional Pauli never alters a Pauli frame. Faults are
Pauli injections placed after a gate, or single measurement-outcome flips.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from .f2core import BitMatrix, BitVector

PREPZ = "PREPZ"
PREPX = "PREPX"
CNOT = "CNOT"
MEASZ = "MEASZ"
MEASX = "MEASX"
CORRX = "CORRX"
CORRZ = "CORRZ"

_PREPS = (PREPZ, PREPX)
_MEASURES = (MEASZ, MEASX)
_CORRECTIONS = (CORRX, CORRZ)


@dataclass(frozen=True)
class ClassicalCondition:
    """Holds iff (measured & mask) == value; value must sit inside mask."""

    mask: BitVector
    value: BitVector

    def __post_init__(self):
        if self.mask.length != self.value.length:
            raise ValueError("mask/value length mismatch")
        if self.value.bits & ~self.mask.bits:
            raise ValueError("condition value has bits outside its mask")

    def holds(self, measured_bits: int) -> bool:
        return (measured_bits & self.mask.bits) == self.value.bits


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple
    cbit: Optional[int] = None
    condition: Optional[ClassicalCondition] = None

    def __post_init__(self):
        if self.kind in _PREPS and len(self.qubits) != 1:
            raise ValueError(f"{self.kind} takes one qubit")
        if self.kind == CNOT and len(self.qubits) != 2:
            raise ValueError("CNOT takes two qubits")
        if self.kind == CNOT and self.qubits[0] == self.qubits[1]:
            raise ValueError("CNOT control equals target")
        if self.kind in _MEASURES:
            if len(self.qubits) != 1 or self.cbit is None:
                raise ValueError(f"{self.kind} needs a qubit and a classical bit")
        if self.kind in _CORRECTIONS and self.condition is None:
            raise ValueError(f"{self.kind} needs a condition")


def prep_z(q: int) -> Gate:
    return Gate(PREPZ, (q,))


def prep_x(q: int) -> Gate:
    return Gate(PREPX, (q,))


def cnot(c: int, t: int) -> Gate:
    return Gate(CNOT, (c, t))


def meas_z(q: int, cbit: int) -> Gate:
    return Gate(MEASZ, (q,), cbit=cbit)


def meas_x(q: int, cbit: int) -> Gate:
    return Gate(MEASX, (q,), cbit=cbit)


def corr_x(q: int, condition: ClassicalCondition) -> Gate:
    return Gate(CORRX, (q,), condition=condition)


def corr_z(q: int, condition: ClassicalCondition) -> Gate:
    return Gate(CORRZ, (q,), condition=condition)


class Circuit:
    """A fixed-width gate list.

    Strict circuits require every qubit to be prepared before first use;
    fragments (gadgets acting on already-prepared data qubits) opt out.
    Classical bits are written at most once either way.
    """

    __slots__ = ("width", "gates", "cbits", "fragment")

    def __init__(self, width: int, gates, cbits: int = 0, fragment: bool = False):
        gates = tuple(gates)
        prepared = set()
        written = set()
        for g in gates:
            for q in g.qubits:
                if not 0 <= q < width:
                    raise ValueError(f"qubit {q} outside width {width}")
            if g.kind in _PREPS:
                prepared.add(g.qubits[0])
            elif not fragment:
                for q in g.qubits:
                    if q not in prepared:
                        raise ValueError(f"qubit {q} used before preparation")
            if g.kind in _MEASURES:
                if not 0 <= g.cbit < cbits:
                    raise ValueError(f"classical bit {g.cbit} outside register {cbits}")
                if g.cbit in written:
                    raise ValueError(f"classical bit {g.cbit} written twice")
                written.add(g.cbit)
            if g.condition is not None:
                cond = g.condition
                if cond.mask.length != cbits:
                    raise ValueError("condition register width mismatch")
                for b in cond.mask.support():
                    if b not in written:
                        raise ValueError(f"condition reads unwritten bit m{b}")
        self.width = width
        self.gates = gates
        self.cbits = cbits
        self.fragment = fragment

    def __len__(self):
        return len(self.gates)

    def __eq__(self, other):
        return (
            isinstance(other, Circuit)
            and self.width == other.width
            and self.cbits == other.cbits
            and self.gates == other.gates
        )

    def count(self, kind: str) -> int:
        return sum(1 for g in self.gates if g.kind == kind)

    def extended(self, more_gates, width=None, cbits=None, fragment=None) -> "Circuit":
        return Circuit(
            width if width is not None else self.width,
            self.gates + tuple(more_gates),
            cbits if cbits is not None else self.cbits,
            self.fragment if fragment is None else fragment,
        )


@dataclass(frozen=True)
class Fault:
    """Pauli injected after gate `location` (or -1 for circuit input),
    plus an optional outcome flip when that gate is a measurement."""

    location: int
    pauli_x: BitVector
    pauli_z: BitVector
    flip: Optional[int] = None

    def describe(self, circuit: "Circuit") -> str:
        where = "input" if self.location < 0 else f"gate {self.location} {circuit.gates[self.location].kind}{circuit.gates[self.location].qubits}"
        parts = []
        if self.pauli_x.weight():
            parts.append(f"X{list(self.pauli_x.support())}")
        if self.pauli_z.weight():
            parts.append(f"Z{list(self.pauli_z.support())}")
        if self.flip is not None:
            parts.append(f"flip m{self.flip}")
        return f"{' '.join(parts) or 'I'} after {where}"


class PropagationResult(NamedTuple):
    residual_x: BitVector
    residual_z: BitVector
    measurement_flips: BitVector


def propagate(circuit: Circuit, fault: Fault) -> PropagationResult:
    """Push a single fault to the end of the circuit.

    Preparations reset the frame on their qubit; CNOT maps X on the control
    onto both qubits and Z on the target onto both; MEASZ records the X frame
    of its qubit (MEASX the Z frame). Conditional corrections are frame
    transparent.
    """
    x = z = 0
    flips = 0
    if fault.location < 0:
        x, z = fault.pauli_x.bits, fault.pauli_z.bits
    for idx, g in enumerate(circuit.gates):
        if g.kind in _PREPS:
            q = g.qubits[0]
            keep = ~(1 << q)
            x &= keep
            z &= keep
        elif g.kind == CNOT:
            c, t = g.qubits
            if (x >> c) & 1:
                x ^= 1 << t
            if (z >> t) & 1:
                z ^= 1 << c
        elif g.kind == MEASZ:
            flips ^= ((x >> g.qubits[0]) & 1) << g.cbit
        elif g.kind == MEASX:
            flips ^= ((z >> g.qubits[0]) & 1) << g.cbit
        if idx == fault.location:
            x ^= fault.pauli_x.bits
            z ^= fault.pauli_z.bits
            if fault.flip is not None:
                flips ^= 1 << fault.flip
    return PropagationResult(
        BitVector(circuit.width, x),
        BitVector(circuit.width, z),
        BitVector(max(circuit.cbits, 1), flips) if circuit.cbits else BitVector(0),
    )


def fault_locations(circuit: Circuit) -> list:
    """One fault per (location, nontrivial Pauli of a single kind).

    Preparations get {X, Z}; CNOTs get the six single-kind two-qubit
    patterns {IX, XI, XX, IZ, ZI, ZZ}; measurements get one outcome flip.
    A Y fault is the co-located X and Z pair, covered jointly by linearity
    of propagation.
    """
    n = circuit.width
    zero = BitVector(n)
    out = []
    for idx, g in enumerate(circuit.gates):
        if g.kind in _PREPS:
            q = g.qubits[0]
            one = BitVector(n, 1 << q)
            out.append(Fault(idx, one, zero))
            out.append(Fault(idx, zero, one))
        elif g.kind == CNOT:
            c, t = g.qubits
            for mask in (1 << t, 1 << c, (1 << c) | (1 << t)):
                out.append(Fault(idx, BitVector(n, mask), zero))
            for mask in (1 << t, 1 << c, (1 << c) | (1 << t)):
                out.append(Fault(idx, zero, BitVector(n, mask)))
        elif g.kind in _MEASURES:
            out.append(Fault(idx, zero, zero, flip=g.cbit))
    return out


def stabilizer_flow(circuit: Circuit) -> tuple:
    """Conjugate the preparation stabilizers to the end of the circuit.

    Only defined for preparation-only circuits (preps and CNOTs). Returns a
    row-aligned (x-part, z-part) matrix pair, one generator per prepared
    qubit.
    """
    gens = []  # [x bits, z bits]
    prepared = {}
    for g in circuit.gates:
        if g.kind == PREPZ:
            if g.qubits[0] in prepared:
                raise ValueError("qubit prepared twice")
            prepared[g.qubits[0]] = len(gens)
            gens.append([0, 1 << g.qubits[0]])
        elif g.kind == PREPX:
            if g.qubits[0] in prepared:
                raise ValueError("qubit prepared twice")
            prepared[g.qubits[0]] = len(gens)
            gens.append([1 << g.qubits[0], 0])
        elif g.kind == CNOT:
            c, t = g.qubits
            for gen in gens:
                if (gen[0] >> c) & 1:
                    gen[0] ^= 1 << t
                if (gen[1] >> t) & 1:
                    gen[1] ^= 1 << c
        else:
            raise ValueError(f"stabilizer flow undefined for {g.kind}")
    n = circuit.width
    xm = BitMatrix(n, [BitVector(n, g[0]) for g in gens])
    zm = BitMatrix(n, [BitVector(n, g[1]) for g in gens])
    return xm, zm


# ---------------------------------------------------------------------------
# text format


def to_text(circuit: Circuit) -> str:
    lines = []
    for g in circuit.gates:
        if g.kind in _PREPS:
            lines.append(f"{g.kind} {g.qubits[0]}")
        elif g.kind == CNOT:
            lines.append(f"CNOT {g.qubits[0]} {g.qubits[1]}")
        elif g.kind in _MEASURES:
            lines.append(f"{g.kind} {g.qubits[0]} -> m{g.cbit}")
        else:
            cond = g.condition
            lines.append(
                f"{g.kind} {g.qubits[0]} IF "
                f"{cond.mask.to_string(zero='0')}={cond.value.to_string(zero='0')}"
            )
    return "\n".join(lines)


def from_text(text: str, width: Optional[int] = None, cbits: Optional[int] = None,
              fragment: bool = False) -> Circuit:
    """Parse the text format; '#' starts a comment, blank lines are skipped."""
    raw = []
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        toks = body.split()
        kind = toks[0].upper()
        try:
            if kind in _PREPS:
                raw.append(Gate(kind, (int(toks[1]),)))
            elif kind == CNOT:
                raw.append(Gate(CNOT, (int(toks[1]), int(toks[2]))))
            elif kind in _MEASURES:
                if toks[2] != "->" or not toks[3].startswith("m"):
                    raise ValueError("expected '-> mN'")
                raw.append(Gate(kind, (int(toks[1]),), cbit=int(toks[3][1:])))
            elif kind in _CORRECTIONS:
                if toks[2].upper() != "IF":
                    raise ValueError("expected IF")
                mask_s, value_s = toks[3].split("=")
                cond = ClassicalCondition(
                    BitVector.from_string(mask_s), BitVector.from_string(value_s)
                )
                raw.append(Gate(kind, (int(toks[1]),), condition=cond))
            else:
                raise ValueError(f"unknown gate {toks[0]!r}")
        except (IndexError, ValueError) as exc:
            raise ValueError(f"line {lineno}: cannot parse {body!r}: {exc}") from None
    if width is None:
        width = max((max(g.qubits) for g in raw), default=-1) + 1
    if cbits is None:
        cbits = max((g.cbit for g in raw if g.cbit is not None), default=-1) + 1
        for g in raw:
            if g.condition is not None:
                cbits = max(cbits, g.condition.mask.length)
    return Circuit(width, raw, cbits, fragment=fragment)
