"""Minimal verification layers, certified by satisfiability.

A verification layer for X-type danger is a set of Z-type measurements
drawn from the span of the detecting generators (the Z stabilizers plus,
for the logical-zero state, the Z logicals) such that every dangerous
error anticommutes with at least one measurement. The synthesis minimizes
the measurement count u first and the total support weight v second, and
keeps the unsatisfiable instances at (u-1) and (u, v-1) as re-checkable
certificates of optimality.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Optional

from .csscode import CssCode, PauliKind
from .f2core import BitMatrix, BitVector, row_space_masks
from .prepsynth import DangerSet
from .satcore import (
    SAT,
    TIMEOUT,
    UNSAT,
    CnfInstance,
    UnsatWitness,
    enumerate_models,
    make_unsat_witness,
    solve,
)


class SynthesisTimeout(Exception):
    pass


class SynthesisInfeasible(Exception):
    pass


@dataclass(frozen=True)
class VerificationMeasurement:
    kind: PauliKind  # type of the measured operator, not of the errors caught
    support: BitVector
    flagged: bool = False
    ancilla: Optional[int] = None
    cbit: Optional[int] = None
    flag_ancilla: Optional[int] = None
    flag_cbit: Optional[int] = None

    def with_allocation(self, ancilla, cbit, flag_ancilla=None, flag_cbit=None):
        return VerificationMeasurement(
            self.kind, self.support, self.flagged, ancilla, cbit,
            flag_ancilla, flag_cbit,
        )

    def with_flag(self, flagged: bool) -> "VerificationMeasurement":
        return VerificationMeasurement(
            self.kind, self.support, flagged, self.ancilla, self.cbit,
            self.flag_ancilla, self.flag_cbit,
        )


@dataclass(frozen=True)
class VerificationLayer:
    detects: PauliKind  # error kind this layer catches
    measurements: tuple
    u: int
    v: int
    witnesses: tuple  # UnsatWitness certificates for (u-1) and (u, v-1)

    def supports(self) -> tuple:
        return tuple(m.support for m in self.measurements)


def measurement_pool(code: CssCode, detects: PauliKind,
                     pool_mode: str = "state") -> BitMatrix:
    """Generators of the operators allowed as verification measurements.

    Z-type measurements detecting X errors may include the Z logicals when
    preparing the logical-zero state; X-type measurements never include X
    logicals, which would flip that state.
    """
    if pool_mode not in ("state", "code"):
        raise ValueError(f"unknown pool mode {pool_mode!r}")
    if detects is PauliKind.X:
        return code.hz.stack(code.lz) if pool_mode == "state" else code.hz
    return code.hx


def _encode(pool_masks, error_masks, n, u, v, wmin):
    """CNF deciding: do u pool elements of total weight <= v cover all errors?"""
    inst = CnfInstance()
    r = len(pool_masks)
    if u == 0:
        if error_masks:
            inst.add_empty_clause("zero measurements cannot cover a nonempty danger set")
        return inst, []
    lam = [[inst.new_var(f"lam[{i}][{j}]") for j in range(r)] for i in range(u)]
    sup = [[inst.new_var(f"sup[{i}][{q}]") for q in range(n)] for i in range(u)]
    for i in range(u):
        for q in range(n):
            touching = [lam[i][j] for j in range(r) if (pool_masks[j] >> q) & 1]
            inst.add_xor(touching + [sup[i][q]], 0)
        inst.add_clause(sup[i])  # measurement must be a nonzero operator
        if wmin > 1:
            # every nonzero pool element has weight >= wmin
            inst.add_at_least(sup[i], wmin)
    for e in error_masks:
        sigmas = []
        for i in range(u):
            odd = [lam[i][j] for j in range(r) if (pool_masks[j] & e).bit_count() & 1]
            s = inst.new_var("sigma")
            inst.add_xor(odd + [s], 0)
            sigmas.append(s)
        inst.add_clause(sigmas)
    if v is not None:
        inst.add_at_most([s for row in sup for s in row], v)
    return inst, sup


def _supports_from_model(model, sup, n):
    out = []
    for row in sup:
        bits = 0
        for q in range(n):
            if model[row[q]]:
                bits |= 1 << q
        out.append(bits)
    return out


def _default_key(support_masks: tuple, n: int):
    return tuple(sorted(tuple(q for q in range(n) if (m >> q) & 1) for m in support_masks))


def _minimal_cover_search(pool_masks, error_masks, n, max_u, budget):
    """(u*, v*, support sets, witnesses): the certified optimum."""
    wmin = min((m.bit_count() for m in pool_masks if m), default=1)
    witness_u = None
    for u in range(1, max_u + 1):
        inst, sup = _encode(pool_masks, error_masks, n, u - 1, None, wmin)
        out = solve(inst, budget=budget)
        if out.status == TIMEOUT:
            raise SynthesisTimeout(f"budget exhausted proving {u - 1} measurements infeasible")
        if out.status == UNSAT:
            witness_u = make_unsat_witness(f"u={u - 1} infeasible", inst, out)
            inst_u, sup_u = _encode(pool_masks, error_masks, n, u, None, wmin)
            out_u = solve(inst_u, budget=budget)
            if out_u.status == TIMEOUT:
                raise SynthesisTimeout("budget exhausted while searching for a cover")
            if out_u.is_sat:
                v = sum(
                    m.bit_count() for m in _supports_from_model(out_u.assignment, sup_u, n)
                )
                break
        else:
            # u-1 already feasible: the loop should have stopped earlier
            raise AssertionError("monotonicity violated in cover search")
    else:
        raise SynthesisInfeasible(
            f"no cover with at most {max_u} measurements exists in this pool"
        )
    # shrink the weight bound until unsat; each feasible round jumps to the
    # model's true weight, so the loop ends at the exact optimum
    witness_v = None
    while True:
        inst_v, sup_v = _encode(pool_masks, error_masks, n, u, v - 1, wmin)
        out_v = solve(inst_v, budget=budget)
        if out_v.status == TIMEOUT:
            raise SynthesisTimeout("budget exhausted while minimizing weight")
        if out_v.status == UNSAT:
            witness_v = make_unsat_witness(f"u={u} v={v - 1} infeasible", inst_v, out_v)
            break
        v = sum(
            m.bit_count()
            for m in _supports_from_model(out_v.assignment, sup_v, n)
        )
    # enumerate all support sets at the optimum
    inst_opt, sup_opt = _encode(pool_masks, error_masks, n, u, v, wmin)
    flat = [s for row in sup_opt for s in row]
    models, _ = enumerate_models(inst_opt, flat, limit=4096, budget=budget)
    seen = set()
    covers = []
    for m in models:
        masks = frozenset(_supports_from_model(m, sup_opt, n))
        if len(masks) < u or masks in seen:
            continue
        seen.add(masks)
        covers.append(tuple(sorted(masks)))
    covers.sort(key=lambda ms: _default_key(ms, n))
    return u, v, covers, (witness_u, witness_v)


def synth_verification(code: CssCode, danger: DangerSet,
                       pool_mode: str = "state", max_u: int = 6,
                       budget: Optional[float] = None,
                       prefer: Optional[Callable] = None) -> VerificationLayer:
    """Smallest verification layer covering the danger set.

    Minimizes the measurement count, then the total weight; among the
    optima the deterministic pick is lexicographic on sorted supports,
    unless `prefer` supplies a different ranking (the protocol assembler
    uses flag cost).
    """
    if not danger:
        return VerificationLayer(danger.kind, (), 0, 0, ())
    layers = enumerate_minimal_verifications(
        code, danger, limit=4096, pool_mode=pool_mode, max_u=max_u, budget=budget
    )
    if prefer is not None:
        layers = sorted(layers, key=lambda l: prefer(l.supports()))
    return layers[0]


def enumerate_minimal_verifications(code: CssCode, danger: DangerSet,
                                    limit: int = 64,
                                    pool_mode: str = "state",
                                    max_u: int = 6,
                                    budget: Optional[float] = None) -> list:
    """Every support set achieving the certified optimal (u, v), in
    lexicographic order, capped at `limit`."""
    if not danger:
        return [VerificationLayer(danger.kind, (), 0, 0, ())]
    pool = measurement_pool(code, danger.kind, pool_mode)
    pool_masks = list(pool.row_masks())
    error_masks = danger.canonical_masks()
    n = code.n
    u, v, covers, witnesses = _minimal_cover_search(
        pool_masks, error_masks, n, max_u, budget
    )
    kind = danger.kind.dual()
    out = []
    for masks in covers[:limit]:
        meas = tuple(
            VerificationMeasurement(kind, BitVector(n, m))
            for m in sorted(masks, key=lambda m: _default_key((m,), n))
        )
        out.append(VerificationLayer(danger.kind, meas, u, v, witnesses))
    return out


def check_coverage(layer: VerificationLayer, danger: DangerSet) -> bool:
    """Direct recomputation: every dangerous error flips some measurement."""
    if not danger:
        return True
    if not layer.measurements:
        return False
    from .f2core import inner

    for e in danger.errors:
        if not any(inner(e.error, m.support) for m in layer.measurements):
            return False
    return True
