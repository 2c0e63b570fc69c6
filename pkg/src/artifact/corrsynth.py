"""Syndrome-conditioned corrections with certified measurement cost.

Once a verification measurement fires, the protocol knows the data holds
one of a handful of residual error classes. This module picks the extra
measurements that disambiguate them: the smallest set (count first, total
support weight second) whose outcomes admit one Pauli recovery per outcome
pattern leaving every class within its weight budget. Classes light enough
to ride through the final correction round only need to stay light; heavy
classes must come back to weight at most one. Optimality at (u-1) and
(u, v-1) is certified by stored unsatisfiable instances, and every branch
is replayed by direct arithmetic before it is returned.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

from .csscode import CssCode, PauliKind, ReductionGroup, residual_weight_limits
from .f2core import BitVector, in_row_space, inner
from .satcore import (
    TIMEOUT,
    UNSAT,
    CnfInstance,
    enumerate_models,
    make_unsat_witness,
    solve,
)
from .verifsynth import (
    SynthesisInfeasible,
    SynthesisTimeout,
    VerificationMeasurement,
    measurement_pool,
)


@dataclass(frozen=True)
class ErrorClass:
    """Residual classes sharing one verification outcome pattern.

    `trigger` is the tuple of verification bits that route here; `members`
    are canonical class representatives. The zero class is always a member:
    a flipped measurement fires the branch with clean data.
    """

    trigger: tuple
    members: tuple


@dataclass(frozen=True)
class CandidateCorrection:
    support: BitVector
    fixes: frozenset  # bit masks of the members this correction leaves within budget


@dataclass(frozen=True)
class CorrectionBranch:
    detects: PauliKind  # kind of the errors being repaired
    trigger: tuple
    members: tuple
    measurements: tuple
    recovery: dict  # measurement outcome tuple -> correction support
    u: int
    v: int
    witnesses: tuple

    def recovery_for(self, outcome: tuple) -> Optional[BitVector]:
        return self.recovery.get(tuple(outcome))


def partition_by_syndrome(supports: Iterable[BitVector],
                          classes: Iterable[BitVector],
                          group: ReductionGroup,
                          n: int,
                          include_singles: bool = True) -> list:
    """Bucket residual classes by which verification measurements they flip.

    Classes silent on every measurement belong to the accept branch and are
    not returned. Weight-one errors are bucketed too when requested, since
    faults inside the verification gadgets inject them, and the zero class
    joins every bucket.
    """
    supports = tuple(supports)
    pool = [group.canonical(e) for e in classes]
    if include_singles:
        pool.extend(group.canonical(BitVector(n, 1 << q)) for q in range(n))
    buckets = {}
    for e in pool:
        trig = tuple(inner(e, s) for s in supports)
        if not any(trig):
            continue
        buckets.setdefault(trig, set()).add(e)
    out = []
    for trig in sorted(buckets):
        members = buckets[trig] | {BitVector.zeros(n)}
        out.append(ErrorClass(trig, tuple(sorted(members, key=lambda b: b.bits))))
    return out


def _threshold_for(code: CssCode, detects: PauliKind) -> int:
    limits = residual_weight_limits(code)
    return limits[0] if detects is PauliKind.X else limits[1]


def _target_weights(members, group: ReductionGroup, max_w: int) -> dict:
    # already-light and over-budget classes must end at weight <= 1; the
    # in-between ones (only present when max_w > 1) may stay where they are
    tgt = {}
    for e in members:
        w = group.reduced_weight(e)
        tgt[e.bits] = 1 if (w <= 1 or w > max_w) else max_w
    return tgt


def _candidate_stream(members, group: ReductionGroup):
    """Identity, then every class one flip away from a member, light first."""
    n = members[0].length if members else 0
    seen = {0}
    out = [BitVector.zeros(n)]
    for e in members:
        for rho in range(n + 1):
            flip = 0 if rho == n else 1 << rho
            c = group.canonical(BitVector(n, e.bits ^ flip))
            if c.bits not in seen:
                seen.add(c.bits)
                out.append(c)
    out.sort(key=lambda c: (c.weight(), c.bits))
    return out


def candidate_corrections(members, group: ReductionGroup, max_w: int) -> list:
    """Corrections worth considering, annotated with what each one fixes.

    Any recovery valid for some outcome group must sit within one flip of
    each over-budget member of that group, so the stream of one-flip
    neighbours is exhaustive. Candidates fixing identical member sets are
    merged (lightest support kept) and strictly dominated ones dropped.
    """
    tgt = _target_weights(members, group, max_w)
    scored = []
    for c in _candidate_stream(members, group):
        fixes = frozenset(
            m.bits for m in members
            if group.reduced_weight(m ^ c) <= tgt[m.bits]
        )
        if fixes:
            scored.append(CandidateCorrection(c, fixes))
    by_fixes = {}
    for c in scored:  # stream is sorted light-first, first one wins
        by_fixes.setdefault(c.fixes, c)
    merged = list(by_fixes.values())
    kept = [
        c for c in merged
        if not any(c.fixes < d.fixes for d in merged)
    ]
    kept.sort(key=lambda c: (c.support.weight(), c.support.bits))
    return kept


def _encode(pool_masks, member_masks, cands, n, u, v, wmin):
    """CNF deciding: can u measurements of total weight <= v split the
    members so that every outcome group shares a feasible correction?"""
    inst = CnfInstance()
    r = len(pool_masks)
    sup = []
    sig = {}
    if u:
        lam = [[inst.new_var(f"lam[{i}][{j}]") for j in range(r)] for i in range(u)]
        sup = [[inst.new_var(f"sup[{i}][{q}]") for q in range(n)] for i in range(u)]
        for i in range(u):
            for q in range(n):
                touching = [lam[i][j] for j in range(r) if (pool_masks[j] >> q) & 1]
                inst.add_xor(touching + [sup[i][q]], 0)
            inst.add_clause(sup[i])  # measuring identity reveals nothing
            if wmin > 1:
                inst.add_at_least(sup[i], wmin)
        for e in member_masks:
            row = []
            for i in range(u):
                odd = [lam[i][j] for j in range(r) if (pool_masks[j] & e).bit_count() & 1]
                s = inst.new_var(f"sig[{e}][{i}]")
                inst.add_xor(odd + [s], 0)
                row.append(s)
            sig[e] = row
    y = {}
    for e in member_masks:
        allowed = {t: inst.new_var(f"y[{e}][{t}]")
                   for t, c in enumerate(cands) if e in c.fixes}
        if not allowed:
            raise AssertionError("member without any candidate correction")
        y[e] = allowed
        inst.add_clause(list(allowed.values()))
    # members landing in the same outcome group must agree on a correction
    for ai in range(len(member_masks)):
        for bi in range(ai + 1, len(member_masks)):
            ea, eb = member_masks[ai], member_masks[bi]
            if u:
                eqs = []
                for i in range(u):
                    q = inst.new_var("eq")
                    inst.add_xor([sig[ea][i], sig[eb][i], q], 1)
                    eqs.append(q)
                gate = inst.new_var("same")
                inst.add_clause([-q for q in eqs] + [gate])
                pre = [-gate]
            else:
                pre = []
            for t in sorted(set(y[ea]) | set(y[eb])):
                va, vb = y[ea].get(t), y[eb].get(t)
                if va is not None and vb is not None:
                    inst.add_clause(pre + [-va, vb])
                    inst.add_clause(pre + [va, -vb])
                elif va is not None:
                    inst.add_clause(pre + [-va])
                else:
                    inst.add_clause(pre + [-vb])
    if u and v is not None:
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


def _support_key(masks, n):
    return tuple(sorted(tuple(q for q in range(n) if (m >> q) & 1) for m in masks))


def _minimal_branch_search(pool_masks, member_masks, cands, n, max_u, budget):
    wmin = min((m.bit_count() for m in pool_masks if m), default=1)
    witness_u = None
    u = None
    first_model = None
    for trial in range(0, max_u + 1):
        inst, sup = _encode(pool_masks, member_masks, cands, n, trial, None, wmin)
        out = solve(inst, budget=budget)
        if out.status == TIMEOUT:
            raise SynthesisTimeout(f"budget exhausted at {trial} measurements")
        if out.status == UNSAT:
            witness_u = make_unsat_witness(f"u={trial} infeasible", inst, out)
            continue
        u = trial
        first_model = _supports_from_model(out.assignment, sup, n)
        break
    else:
        raise SynthesisInfeasible(
            f"no correction with at most {max_u} measurements exists in this pool"
        )
    if u == 0:
        return 0, 0, (), ()
    v = sum(m.bit_count() for m in first_model)
    witness_v = None
    while True:
        inst_v, sup_v = _encode(pool_masks, member_masks, cands, n, u, v - 1, wmin)
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
    inst_opt, sup_opt = _encode(pool_masks, member_masks, cands, n, u, v, wmin)
    flat = [s for row in sup_opt for s in row]
    models, _ = enumerate_models(inst_opt, flat, limit=4096, budget=budget)
    seen = set()
    choices = []
    for m in models:
        masks = frozenset(_supports_from_model(m, sup_opt, n))
        if len(masks) < u or masks in seen:
            continue
        seen.add(masks)
        choices.append(tuple(sorted(masks)))
    choices.sort(key=lambda ms: _support_key(ms, n))
    return u, v, choices[0], (witness_u, witness_v)


def _lightest_common(grp, group: ReductionGroup, tgt) -> Optional[BitVector]:
    for c in _candidate_stream(grp, group):
        if all(group.reduced_weight(m ^ c) <= tgt[m.bits] for m in grp):
            return c
    return None


def _derive_recovery(members, supports, group: ReductionGroup, tgt) -> dict:
    outcome_groups = {}
    for e in members:
        s = tuple(inner(e, sup) for sup in supports)
        outcome_groups.setdefault(s, []).append(e)
    recovery = {}
    for s in sorted(outcome_groups):
        c = _lightest_common(outcome_groups[s], group, tgt)
        if c is None:
            raise AssertionError("satisfiable split admitted no shared recovery")
        recovery[s] = c
    return recovery


def synth_correction(code: CssCode, eclass: ErrorClass, detects: PauliKind,
                     pool_mode: str = "state", mode: str = "state",
                     threshold: Optional[int] = None, max_u: int = 4,
                     budget: Optional[float] = None) -> CorrectionBranch:
    """Certified-minimal correction branch for one verification outcome.

    Minimizes the number of extra measurements, then their total weight;
    ties are broken lexicographically on sorted supports. The recovery map
    is rebuilt from the chosen supports by direct search, so it never
    depends on solver internals, and the finished branch must pass
    `verify_branch` before it is returned.
    """
    group = code.reduction_group(detects, mode)
    if threshold is None:
        threshold = _threshold_for(code, detects)
    n = code.n
    members = tuple(sorted(
        {group.canonical(e) for e in eclass.members} | {BitVector.zeros(n)},
        key=lambda b: b.bits,
    ))
    tgt = _target_weights(members, group, threshold)
    cands = candidate_corrections(members, group, threshold)
    pool = measurement_pool(code, detects, pool_mode)
    pool_masks = list(pool.row_masks())
    member_masks = [e.bits for e in members]
    u, v, support_masks, witnesses = _minimal_branch_search(
        pool_masks, member_masks, cands, n, max_u, budget
    )
    kind = detects.dual()
    meas = tuple(
        VerificationMeasurement(kind, BitVector(n, m))
        for m in sorted(support_masks, key=lambda m: _support_key((m,), n))
    )
    recovery = _derive_recovery(members, [m.support for m in meas], group, tgt)
    branch = CorrectionBranch(
        detects, tuple(eclass.trigger), members, meas, recovery, u, v, witnesses
    )
    if not verify_branch(branch, code, pool_mode=pool_mode, mode=mode,
                         threshold=threshold):
        raise AssertionError("correction branch failed the independent replay")
    return branch


def verify_branch(branch: CorrectionBranch, code: CssCode,
                  pool_mode: str = "state", mode: str = "state",
                  threshold: Optional[int] = None) -> bool:
    """Replay a branch with plain arithmetic, no solver involved.

    Checks that the measurements lie in the allowed pool, that the claimed
    (u, v) match them, and that every member's outcome pattern maps to a
    recovery leaving it within its weight budget.
    """
    group = code.reduction_group(branch.detects, mode)
    if threshold is None:
        threshold = _threshold_for(code, branch.detects)
    pool = measurement_pool(code, branch.detects, pool_mode)
    supports = [m.support for m in branch.measurements]
    if branch.u != len(supports):
        return False
    if branch.v != sum(s.weight() for s in supports):
        return False
    for s in supports:
        if s.is_zero() or in_row_space(pool, s) is None:
            return False
    for e in branch.members:
        w = group.reduced_weight(e)
        target = 1 if (w <= 1 or w > threshold) else threshold
        outcome = tuple(inner(e, s) for s in supports)
        c = branch.recovery.get(outcome)
        if c is None or group.reduced_weight(e ^ c) > target:
            return False
    return True
