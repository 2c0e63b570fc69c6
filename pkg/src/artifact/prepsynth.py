"""Logical-zero encoding circuits and the errors they spread.

Two constructions are available. The default greedily eliminates check
matrix columns by repeatedly applying the CNOT whose column sum lowers the
total weight the most (ties resolved row-major), layering disjoint qubit
pairs for depth, and falling back to a row-reduction restart at a plateau.
It consistently needs fewer CNOTs than the textbook alternative, which
fans out each pivot of the reduced check matrix to the rest of its row.

After synthesis every single fault location of the circuit is propagated
to the end; residuals whose coset-reduced weight exceeds the per-type
limit form the danger set that verification must detect.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .circuitir import Circuit, Fault, cnot, fault_locations, prep_x, prep_z, propagate, stabilizer_flow
from .csscode import CssCode, PauliKind, ReductionGroup, residual_weight_limits
from .f2core import BitMatrix, BitVector, rref


def _np_rref(m):
    m = m.copy() % 2
    nrows, ncols = m.shape
    r = 0
    for c in range(ncols):
        piv = None
        for i in range(r, nrows):
            if m[i, c]:
                piv = i
                break
        if piv is None:
            continue
        m[[r, piv]] = m[[piv, r]]
        for i in range(nrows):
            if i != r and m[i, c]:
                m[i] ^= m[r]
        r += 1
        if r == nrows:
            break
    return m


def _greedy_eliminate(checks_in, optimize_depth=True):
    """CNOT schedule turning the check matrix into isolated columns.

    Returns (cnots, final): applying column ops col_j += col_i for each
    (i, j) in order leaves `final` with exactly `rank` nonzero columns.
    """
    checks = checks_in.copy().astype(np.int64) % 2
    ncols = checks.shape[1]
    rank_ = int(np.sum(np.any(_np_rref(checks) != 0, axis=1)))

    def is_reduced():
        return int(np.sum(np.all(checks == 0, axis=0))) == ncols - rank_

    def full_costs():
        c = np.array(
            [[np.sum((checks[:, i] + checks[:, j]) % 2) for j in range(ncols)]
             for i in range(ncols)]
        )
        c -= np.sum(checks, axis=0)
        np.fill_diagonal(c, 1)
        return c

    costs = full_costs()
    used = []
    cnots = []
    guard = 0
    while not is_reduced():
        guard += 1
        if guard > 20000:
            raise RuntimeError("greedy elimination failed to converge")
        mask = np.zeros((ncols, ncols), dtype=bool)
        if used:
            mask[used, :] = True
            mask[:, used] = True
        visible = np.ma.array(costs, mask=mask)
        if np.ma.all(visible >= 0) or len(used) == ncols:
            if not used:
                # genuine plateau: restart from the row-reduced matrix
                checks = _np_rref(checks)
                costs = full_costs()
            else:
                used = []  # close the depth layer, reopen all pairs
            continue
        i, j = np.unravel_index(np.ma.argmin(visible), costs.shape)
        i, j = int(i), int(j)
        cnots.append((i, j))
        if optimize_depth:
            used.append(i)
            used.append(j)
        checks[:, j] = (checks[:, i] + checks[:, j]) % 2
        new_weights = np.sum((checks[:, j][:, np.newaxis] + checks) % 2, axis=0)
        costs[j, :] = new_weights - np.sum(checks, axis=0)
        costs[:, j] = new_weights - np.sum(checks[:, j])
        np.fill_diagonal(costs, 1)
    return cnots, checks


def _matrix_to_np(m: BitMatrix):
    return np.array(
        [[(row.bits >> c) & 1 for c in range(m.ncols)] for row in m.rows],
        dtype=np.int64,
    )


def synth_prep(code: CssCode, method: str = "greedy",
               optimize_depth: bool = True) -> Circuit:
    """Encoding circuit for the logical-zero state.

    The circuit prepares n qubits (PrepX on the X-stabilizer sources, PrepZ
    elsewhere) and entangles them with CNOTs; its stabilizer flow spans
    exactly <hx> on the X side and <hz, lz> on the Z side.
    """
    n = code.n
    if method == "greedy":
        cnots, final = _greedy_eliminate(_matrix_to_np(code.hx), optimize_depth)
        controls = [q for q in range(n) if np.sum(final[:, q]) >= 1]
        gates = [prep_x(q) for q in controls]
        gates += [prep_z(q) for q in range(n) if q not in controls]
        # the column schedule eliminated into the sources; the circuit runs
        # the conjugate order, fanning back out
        gates += [cnot(i, j) for (i, j) in reversed(cnots)]
    elif method == "rref":
        red, pivots, r = rref(code.hx)
        gates = [prep_x(p) for p in pivots]
        gates += [prep_z(q) for q in range(n) if q not in pivots]
        for i, p in enumerate(pivots):
            for q in red.rows[i].support():
                if q != p:
                    gates.append(cnot(p, q))
    else:
        raise ValueError(f"unknown prep method {method!r}")
    circuit = Circuit(n, gates)
    if not verify_prep(circuit, code):
        raise AssertionError("synthesized prep circuit fails stabilizer check")
    return circuit


def _same_rowspace(a: BitMatrix, b: BitMatrix) -> bool:
    ra = [r for r in rref(a).reduced.rows if not r.is_zero()]
    rb = [r for r in rref(b).reduced.rows if not r.is_zero()]
    return ra == rb


def verify_prep(circuit: Circuit, code: CssCode) -> bool:
    """Does the circuit stabilize the logical-zero state of the code?

    Flows every preparation stabilizer to the output and compares spans:
    X-type generators must span <hx>, Z-type must span <hz, lz>.
    """
    if circuit.width != code.n:
        return False
    try:
        xm, zm = stabilizer_flow(circuit)
    except ValueError:
        return False
    x_rows, z_rows = [], []
    for xr, zr in zip(xm.rows, zm.rows):
        if not xr.is_zero() and not zr.is_zero():
            return False  # mixed generator cannot arise from a CSS prep
        if not xr.is_zero():
            x_rows.append(xr)
        elif not zr.is_zero():
            z_rows.append(zr)
        else:
            return False
    n = code.n
    return _same_rowspace(BitMatrix(n, x_rows), code.hx) and _same_rowspace(
        BitMatrix(n, z_rows), code.hz.stack(code.lz)
    )


@dataclass(frozen=True)
class DangerousError:
    error: BitVector  # canonical coset representative
    reduced: int
    witnesses: tuple  # faults whose residual lands in this coset


@dataclass(frozen=True)
class DangerSet:
    kind: PauliKind
    threshold: int
    group: ReductionGroup
    errors: tuple

    def canonical_masks(self) -> list:
        return [e.error.bits for e in self.errors]

    def __len__(self):
        return len(self.errors)

    def __bool__(self):
        return bool(self.errors)


def dangerous_errors(circuit: Circuit, code: CssCode, kind: PauliKind,
                     mode: str = "state",
                     threshold: Optional[int] = None) -> DangerSet:
    """Single-fault residuals of one kind that exceed the per-type limit.

    Faults of the other Pauli kind cannot contribute (CNOT conjugation
    never mixes kinds), and a Y fault contributes exactly its same-kind
    component, so the separated fault list is exhaustive here.
    """
    group = code.reduction_group(kind, mode)
    if threshold is None:
        limits = residual_weight_limits(code)
        threshold = limits[0] if kind is PauliKind.X else limits[1]
    buckets = {}
    for f in fault_locations(circuit):
        res = propagate(circuit, f)
        residual = res.residual_x if kind is PauliKind.X else res.residual_z
        if residual.is_zero():
            continue
        rw = group.reduced_weight(residual)
        if rw <= threshold:
            continue
        canon = group.canonical(residual)
        buckets.setdefault(canon, []).append(f)
    errors = [
        DangerousError(canon, canon.weight(), tuple(faults))
        for canon, faults in buckets.items()
    ]
    errors.sort(key=lambda e: (e.reduced, e.error.bits))
    return DangerSet(kind, threshold, group, tuple(errors))


def residual_classes(circuit: Circuit, code: CssCode, kind: PauliKind,
                     mode: str = "code") -> frozenset:
    """Coset labels of every single-fault residual of the given kind.

    Used as the escape set for hook errors: a hook landing in a class the
    encoding circuit already produces needs no separate treatment.
    """
    group = code.reduction_group(kind, mode)
    labels = set()
    for f in fault_locations(circuit):
        res = propagate(circuit, f)
        residual = res.residual_x if kind is PauliKind.X else res.residual_z
        labels.add(group.label(residual))
    return frozenset(labels)
