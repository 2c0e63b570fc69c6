"""End-to-end assembly of deterministic logical-zero preparation protocols.

The assembler chains the synthesis stages: encoding circuit, danger
analysis, flag-aware verification selection, ancilla allocation, fault
bucketing by propagation through the assembled gadgets, and per-outcome
correction synthesis. Branch members come from dynamic propagation rather
than from syndrome arithmetic on the encoding circuit alone, because a
fault inside a verification gadget is seen only by the measurements that
have not coupled yet; the same physical error can therefore fire a
different outcome pattern than its textbook syndrome.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from typing import Optional

from .circuitir import (CNOT, MEASX, MEASZ, Circuit, ClassicalCondition,
                        Fault, from_text, propagate, to_text)
from .corrsynth import CorrectionBranch, ErrorClass, synth_correction
from .csscode import (CssCode, PauliKind, code_from_json, code_to_json,
                      residual_weight_limits)
from .f2core import BitVector
from .flagsynth import MeasurementGadget, flag_measurements, needs_flag
from .prepsynth import dangerous_errors, residual_classes, synth_prep
from .satcore import UnsatWitness
from .verifsynth import (SynthesisInfeasible, VerificationLayer,
                         VerificationMeasurement,
                         enumerate_minimal_verifications, synth_verification)


class AssemblyError(Exception):
    """A protocol reached assembly with an uncorrectable single fault."""


@dataclass(frozen=True)
class ArmedBranch:
    """A correction branch wired to its trigger over the classical register.

    `flag_of` is the index of the flagged verification measurement this
    branch serves, or None for a syndrome-triggered branch.
    """

    condition: ClassicalCondition
    branch: CorrectionBranch
    flag_of: Optional[int] = None


@dataclass(frozen=True)
class ProtocolLayer:
    verification: VerificationLayer  # measurements carry allocation and flags
    branches: tuple                  # ArmedBranch, sorted by trigger
    flag_branches: tuple             # ArmedBranch per flagged measurement
    early_exit: bool = False

    @property
    def detects(self) -> PauliKind:
        return self.verification.detects

    @property
    def measurements(self) -> tuple:
        return self.verification.measurements


@dataclass(frozen=True)
class DetFtProtocol:
    code: CssCode
    prep: Circuit
    layers: tuple
    method: str = "greedy"
    pool_mode: str = "state"

    def _all_measurements(self):
        for layer in self.layers:
            yield from layer.measurements
            for ab in layer.branches + layer.flag_branches:
                yield from ab.branch.measurements

    @property
    def width(self) -> int:
        w = self.code.n
        for m in self._all_measurements():
            w = max(w, m.ancilla + 1)
            if m.flagged:
                w = max(w, m.flag_ancilla + 1)
        return w

    @property
    def cbits(self) -> int:
        c = 0
        for m in self._all_measurements():
            c = max(c, m.cbit + 1)
            if m.flagged:
                c = max(c, m.flag_cbit + 1)
        return c

    def metrics(self) -> "MetricsRow":
        return metrics(self)

    def to_json(self) -> dict:
        return protocol_to_json(self)

    @staticmethod
    def from_json(d: dict) -> "DetFtProtocol":
        return protocol_from_json(d)


def unconditional_circuit(protocol: DetFtProtocol) -> Circuit:
    """Encoding plus every verification gadget; the part that always runs."""
    gates = list(protocol.prep.gates)
    for layer in protocol.layers:
        for m in layer.measurements:
            gates += MeasurementGadget(m).gates()
    return Circuit(protocol.width, gates, cbits=protocol.cbits)


def joint_fault_locations(circuit: Circuit) -> list:
    """Exhaustive one-location fault set, joint Paulis included.

    Every gate contributes all nonzero Pauli patterns on its own qubits
    placed after it fires (3 for one-qubit gates, 15 for CNOT), and every
    measurement additionally contributes one outcome flip.
    """
    w = circuit.width
    zero = BitVector(w)
    out = []
    for idx, g in enumerate(circuit.gates):
        qs = g.qubits
        for pat in range(1, 1 << (2 * len(qs))):
            xm = zm = 0
            for j, q in enumerate(qs):
                if (pat >> (2 * j)) & 1:
                    xm |= 1 << q
                if (pat >> (2 * j + 1)) & 1:
                    zm |= 1 << q
            out.append(Fault(idx, BitVector(w, xm), BitVector(w, zm)))
        if g.kind in (MEASZ, MEASX):
            out.append(Fault(idx, zero, zero, flip=g.cbit))
    return out


def _allocate_verifications(code, verifs):
    """Assign ancillas after the data block, classical bits in gadget order
    (measurement bit first, flag bit right after)."""
    anc, cb = code.n, 0
    out = []
    for vl in verifs:
        ms = []
        for m in vl.measurements:
            if m.flagged:
                ms.append(m.with_allocation(anc, cb, anc + 1, cb + 1))
                anc += 2
                cb += 2
            else:
                ms.append(m.with_allocation(anc, cb))
                anc += 1
                cb += 1
        out.append(VerificationLayer(vl.detects, tuple(ms), vl.u, vl.v,
                                     vl.witnesses))
    return out, anc, cb


def _bucket_faults(code, flat, alloc_layers):
    """Propagate every single-location fault and sort the survivors.

    Returns per-layer dicts: outcome pattern -> residual classes of the
    layer's kind, and flagged-measurement index -> hook residual classes.
    A fault whose leftover of some kind is claimed by no branch must be
    within that kind's weight budget, else assembly stops here.
    """
    n = code.n
    data_mask = (1 << n) - 1
    limits = residual_weight_limits(code)
    groups = {k: code.reduction_group(k, "state") for k in PauliKind}
    synd = [{} for _ in alloc_layers]
    flag = [{} for _ in alloc_layers]
    for fault in joint_fault_locations(flat):
        res = propagate(flat, fault)
        flips = res.measurement_flips.bits
        residual = {
            PauliKind.X: groups[PauliKind.X].canonical(
                BitVector(n, res.residual_x.bits & data_mask)),
            PauliKind.Z: groups[PauliKind.Z].canonical(
                BitVector(n, res.residual_z.bits & data_mask)),
        }
        claimed = {PauliKind.X: False, PauliKind.Z: False}
        for li, vl in enumerate(alloc_layers):
            b = tuple((flips >> m.cbit) & 1 for m in vl.measurements)
            fired_flags = [i for i, m in enumerate(vl.measurements)
                           if m.flagged and (flips >> m.flag_cbit) & 1]
            if fired_flags:
                hook_kind = vl.detects.dual()
                for i in fired_flags:
                    flag[li].setdefault(i, set()).add(residual[hook_kind].bits)
                claimed[hook_kind] = True
            elif any(b):
                synd[li].setdefault(b, set()).add(residual[vl.detects].bits)
                claimed[vl.detects] = True
        for kind in PauliKind:
            if claimed[kind]:
                continue
            lim = limits[0] if kind is PauliKind.X else limits[1]
            if residual[kind].weight() > lim:
                raise AssemblyError(
                    f"unhandled {kind.value} residual "
                    f"{sorted(residual[kind].support())} from "
                    f"{fault.describe(flat)}"
                )
    return synd, flag


def _finish(code, prep, verifs, method, pool_mode, corr_max_u, budget, check):
    alloc_layers, anc, cb = _allocate_verifications(code, verifs)
    gadget_gates = [g for vl in alloc_layers for m in vl.measurements
                    for g in MeasurementGadget(m).gates()]
    flat = Circuit(anc, tuple(prep.gates) + tuple(gadget_gates), cbits=cb)
    synd, flag = _bucket_faults(code, flat, alloc_layers)

    n = code.n
    per_layer = []
    for li, vl in enumerate(alloc_layers):
        bs = []
        for trig in sorted(synd[li]):
            members = tuple(BitVector(n, m) for m in sorted(synd[li][trig]))
            bs.append(synth_correction(
                code, ErrorClass(trig, members), vl.detects,
                pool_mode=pool_mode, max_u=corr_max_u, budget=budget))
        fbs = []
        for i in sorted(flag[li]):
            members = tuple(BitVector(n, m) for m in sorted(flag[li][i]))
            fbs.append((i, synth_correction(
                code, ErrorClass((1,), members), vl.detects.dual(),
                pool_mode=pool_mode, max_u=corr_max_u, budget=budget)))
        per_layer.append((bs, fbs))

    # branch gadgets get their own ancillas and bits, after the layers'
    def place(br):
        nonlocal anc, cb
        ms = []
        for m in br.measurements:
            ms.append(m.with_allocation(anc, cb))
            anc += 1
            cb += 1
        return CorrectionBranch(br.detects, br.trigger, br.members,
                                tuple(ms), br.recovery, br.u, br.v,
                                br.witnesses)

    placed = [([place(b) for b in bs], [(i, place(b)) for i, b in fbs])
              for bs, fbs in per_layer]
    total_cbits = cb

    layers = []
    for li, vl in enumerate(alloc_layers):
        bs, fbs = placed[li]
        watch = 0
        for m in vl.measurements:
            watch |= 1 << m.cbit
            if m.flagged:
                watch |= 1 << m.flag_cbit
        armed = []
        for br in bs:
            value = 0
            for bit, m in zip(br.trigger, vl.measurements):
                if bit:
                    value |= 1 << m.cbit
            armed.append(ArmedBranch(
                ClassicalCondition(BitVector(total_cbits, watch),
                                   BitVector(total_cbits, value)),
                br))
        farmed = []
        for i, br in fbs:
            fbit = 1 << vl.measurements[i].flag_cbit
            farmed.append(ArmedBranch(
                ClassicalCondition(BitVector(total_cbits, fbit),
                                   BitVector(total_cbits, fbit)),
                br, flag_of=i))
        layers.append(ProtocolLayer(vl, tuple(armed), tuple(farmed)))

    proto = DetFtProtocol(code, prep, tuple(layers), method, pool_mode)
    if check:
        from .simnoise import exhaustive_single_fault_check

        bad = exhaustive_single_fault_check(proto)
        if bad:
            raise AssemblyError(
                f"{len(bad)} single-fault violations; first: {bad[0]}")
    return proto


def _layer_inputs(code, prep, pool_mode):
    """(danger set, hook escape labels) per needed layer, X errors first."""
    out = []
    for kind in (PauliKind.X, PauliKind.Z):
        danger = dangerous_errors(prep, code, kind)
        if not danger:
            continue
        escape = residual_classes(prep, code, kind.dual(), mode="code")
        out.append((danger, escape))
    return out


def assemble(code: CssCode, method: str = "greedy", pool_mode: str = "state",
             max_u: int = 6, corr_max_u: int = 4,
             budget: Optional[float] = None,
             check: bool = True) -> DetFtProtocol:
    """Build the deterministic fault-tolerant preparation protocol.

    Verification picks minimize measurement count then total weight, and
    among those optima prefer fewer flagged measurements (lexicographic
    order last). Every nonzero outcome pattern reachable from one fault
    gets a certified-minimal correction branch; every flagged measurement
    gets a branch for its hook errors. With `check` the finished protocol
    is replayed against the full single-fault set and assembly fails
    loudly if anything slips through.
    """
    prep = synth_prep(code, method=method)
    verifs = []
    for danger, escape in _layer_inputs(code, prep, pool_mode):
        meas_kind = danger.kind.dual()

        def prefer(sups, _k=meas_kind, _esc=escape):
            return sum(1 for s in sups if needs_flag(code, _k, s, _esc))

        vl = synth_verification(code, danger, pool_mode=pool_mode,
                                max_u=max_u, budget=budget, prefer=prefer)
        meas = flag_measurements(code, vl.measurements, escape)
        verifs.append(VerificationLayer(vl.detects, meas, vl.u, vl.v,
                                        vl.witnesses))
    return _finish(code, prep, verifs, method, pool_mode, corr_max_u,
                   budget, check)


def _objective(protocol: DetFtProtocol):
    m = metrics(protocol)
    sups = tuple(
        tuple(tuple(s.support()) for s in layer.verification.supports())
        for layer in protocol.layers
    )
    return (
        m.total_count,
        m.total_weight,
        sum(m.corr_counts) + sum(m.flag_corr_counts),
        sum(m.corr_weights) + sum(m.flag_corr_weights),
        sups,
    )


def global_optimize(code: CssCode, method: str = "greedy",
                    pool_mode: str = "state", limit: int = 256,
                    max_u: int = 6, corr_max_u: int = 4,
                    budget: Optional[float] = None,
                    check: bool = True) -> tuple:
    """Search every minimal verification cover for the cheapest protocol.

    All covers achieving the certified optimal measurement count and weight
    are assembled in full and compared on total verification cost, then
    total correction cost, then support order. Returns (protocol, truncated)
    where `truncated` reports an exhausted time budget or a clipped cover
    enumeration; the result is never worse than `assemble`, which seeds the
    search. A zero budget skips the sweep entirely.
    """
    start = time.monotonic()
    prep = synth_prep(code, method=method)
    inputs = _layer_inputs(code, prep, pool_mode)
    best = assemble(code, method=method, pool_mode=pool_mode, max_u=max_u,
                    corr_max_u=corr_max_u, check=False)
    best_key = _objective(best)
    truncated = False
    if budget == 0:
        truncated = True
        choice_lists = []
    else:
        choice_lists = [
            enumerate_minimal_verifications(code, danger, limit=limit,
                                            pool_mode=pool_mode, max_u=max_u)
            for danger, _ in inputs
        ]
        if any(len(c) == limit for c in choice_lists):
            truncated = True
    for combo in itertools.product(*choice_lists):
        if budget is not None and time.monotonic() - start > budget:
            truncated = True
            break
        verifs = []
        for (danger, escape), vl in zip(inputs, combo):
            meas = flag_measurements(code, vl.measurements, escape)
            verifs.append(VerificationLayer(vl.detects, meas, vl.u, vl.v,
                                            vl.witnesses))
        try:
            cand = _finish(code, prep, verifs, method, pool_mode,
                           corr_max_u, None, False)
        except (SynthesisInfeasible, AssemblyError):
            continue
        key = _objective(cand)
        if key < best_key:
            best, best_key = cand, key
    if check:
        from .simnoise import exhaustive_single_fault_check

        bad = exhaustive_single_fault_check(best)
        if bad:
            raise AssemblyError(
                f"{len(bad)} single-fault violations; first: {bad[0]}")
    return best, truncated


# ---------------------------------------------------------------------------
# metrics


@dataclass(frozen=True)
class MetricsRow:
    """Resource counts read off the emitted gate fragments.

    Counts are ancillas, weights are CNOTs that touch the data block; the
    flag weight counts the CNOTs between flag and measurement ancilla.
    Correction entries are listed per branch, syndrome triggers in sorted
    order followed by flag branches in measurement order.
    """

    code: str
    prep_cnots: int
    verif_count: int
    flag_count: int
    verif_weight: int
    flag_weight: int
    corr_counts: tuple
    corr_weights: tuple
    flag_corr_counts: tuple
    flag_corr_weights: tuple

    @property
    def total_count(self) -> int:
        return self.verif_count + self.flag_count

    @property
    def total_weight(self) -> int:
        return self.verif_weight + self.flag_weight

    @property
    def mean_corr_count(self) -> float:
        every = self.corr_counts + self.flag_corr_counts
        return sum(every) / len(every) if every else 0.0

    @property
    def mean_corr_weight(self) -> float:
        every = self.corr_weights + self.flag_corr_weights
        return sum(every) / len(every) if every else 0.0

    def as_dict(self) -> dict:
        return {
            "code": self.code,
            "prep_cnots": self.prep_cnots,
            "verif_count": self.verif_count,
            "flag_count": self.flag_count,
            "verif_weight": self.verif_weight,
            "flag_weight": self.flag_weight,
            "corr_counts": list(self.corr_counts),
            "corr_weights": list(self.corr_weights),
            "flag_corr_counts": list(self.flag_corr_counts),
            "flag_corr_weights": list(self.flag_corr_weights),
            "total_count": self.total_count,
            "total_weight": self.total_weight,
        }


def _data_cnots(gates, n):
    return sum(1 for g in gates if g.kind == CNOT and min(g.qubits) < n)


def metrics(protocol: DetFtProtocol) -> MetricsRow:
    n = protocol.code.n
    vc = fc = vw = fw = 0
    cc, cw, fcc, fcw = [], [], [], []
    for layer in protocol.layers:
        for m in layer.measurements:
            gates = MeasurementGadget(m).gates()
            vc += 1
            vw += _data_cnots(gates, n)
            if m.flagged:
                fc += 1
                fw += sum(1 for g in gates
                          if g.kind == CNOT and min(g.qubits) >= n)
        for ab in layer.branches:
            gates = [g for m in ab.branch.measurements
                     for g in MeasurementGadget(m).gates()]
            cc.append(len(ab.branch.measurements))
            cw.append(_data_cnots(gates, n))
        for ab in layer.flag_branches:
            gates = [g for m in ab.branch.measurements
                     for g in MeasurementGadget(m).gates()]
            fcc.append(len(ab.branch.measurements))
            fcw.append(_data_cnots(gates, n))
    return MetricsRow(protocol.code.name, protocol.prep.count(CNOT),
                      vc, fc, vw, fw, tuple(cc), tuple(cw),
                      tuple(fcc), tuple(fcw))


# ---------------------------------------------------------------------------
# rendering and serialization


def protocol_text(protocol: DetFtProtocol) -> str:
    """One parseable circuit file: the deterministic part as plain gates,
    every branch as its gadgets plus outcome-conditioned correction gates."""
    n = protocol.code.n
    kindmap = {PauliKind.X: "CORRX", PauliKind.Z: "CORRZ"}
    lines = [
        f"# {protocol.code.name}: deterministic logical-zero preparation",
        f"# {protocol.width} qubits ({n} data), {protocol.cbits} classical bits",
        "# encoding",
        to_text(protocol.prep),
    ]
    for li, layer in enumerate(protocol.layers):
        lines.append(f"# layer {li}: verification against {layer.detects.value} errors")
        for m in layer.measurements:
            flag = ", flag" if m.flagged else ""
            lines.append(f"# measure {m.kind.value}{sorted(m.support.support())}"
                         f" -> m{m.cbit}{flag}")
            lines.append(to_text(Circuit(protocol.width,
                                         MeasurementGadget(m).gates(),
                                         protocol.cbits, fragment=True)))
        for ab in layer.branches + layer.flag_branches:
            br = ab.branch
            what = (f"flag branch of m{layer.measurements[ab.flag_of].cbit}"
                    if ab.flag_of is not None
                    else f"branch b={''.join(map(str, br.trigger))}")
            lines.append(f"# {what} (u={br.u}, v={br.v})")
            frag = [g for m in br.measurements for g in MeasurementGadget(m).gates()]
            if frag:
                lines.append(to_text(Circuit(protocol.width, frag,
                                             protocol.cbits, fragment=True)))
            outcome_bits = [m.cbit for m in br.measurements]
            for outcome, corr in sorted(br.recovery.items()):
                if corr.is_zero():
                    continue
                mask = ab.condition.mask.bits
                value = ab.condition.value.bits
                for bit, cb in zip(outcome, outcome_bits):
                    mask |= 1 << cb
                    value |= bit << cb
                cond = ClassicalCondition(BitVector(protocol.cbits, mask),
                                          BitVector(protocol.cbits, value))
                for q in corr.support():
                    lines.append(f"{kindmap[br.detects]} {q} IF "
                                 f"{cond.mask.to_string(zero='0')}="
                                 f"{cond.value.to_string(zero='0')}")
    return "\n".join(lines) + "\n"


def _meas_to_json(m: VerificationMeasurement) -> dict:
    return {
        "kind": m.kind.value,
        "support": m.support.to_string(),
        "flagged": m.flagged,
        "ancilla": m.ancilla,
        "cbit": m.cbit,
        "flag_ancilla": m.flag_ancilla,
        "flag_cbit": m.flag_cbit,
    }


def _meas_from_json(d: dict) -> VerificationMeasurement:
    return VerificationMeasurement(
        PauliKind(d["kind"]), BitVector.from_string(d["support"]),
        bool(d["flagged"]), d["ancilla"], d["cbit"],
        d["flag_ancilla"], d["flag_cbit"],
    )


def _armed_to_json(ab: ArmedBranch) -> dict:
    br = ab.branch
    return {
        "trigger": list(br.trigger),
        "flag_of": ab.flag_of,
        "condition": {
            "mask": ab.condition.mask.to_string(zero="0"),
            "value": ab.condition.value.to_string(zero="0"),
        },
        "detects": br.detects.value,
        "members": [m.to_string() for m in br.members],
        "measurements": [_meas_to_json(m) for m in br.measurements],
        "recovery": {
            "".join(map(str, k)): v.to_string()
            for k, v in sorted(br.recovery.items())
        },
        "u": br.u,
        "v": br.v,
        "witnesses": [w.to_json() for w in br.witnesses],
    }


def _armed_from_json(d: dict) -> ArmedBranch:
    recovery = {
        tuple(int(ch) for ch in key): BitVector.from_string(val)
        for key, val in d["recovery"].items()
    }
    branch = CorrectionBranch(
        PauliKind(d["detects"]),
        tuple(d["trigger"]),
        tuple(BitVector.from_string(s) for s in d["members"]),
        tuple(_meas_from_json(m) for m in d["measurements"]),
        recovery,
        int(d["u"]),
        int(d["v"]),
        tuple(UnsatWitness.from_json(w) for w in d["witnesses"]),
    )
    cond = ClassicalCondition(BitVector.from_string(d["condition"]["mask"]),
                              BitVector.from_string(d["condition"]["value"]))
    return ArmedBranch(cond, branch, d.get("flag_of"))


def protocol_to_json(protocol: DetFtProtocol) -> dict:
    layers = []
    for layer in protocol.layers:
        vl = layer.verification
        layers.append({
            "detects": vl.detects.value,
            "u": vl.u,
            "v": vl.v,
            "witnesses": [w.to_json() for w in vl.witnesses],
            "measurements": [_meas_to_json(m) for m in vl.measurements],
            "branches": [_armed_to_json(ab) for ab in layer.branches],
            "flag_branches": [_armed_to_json(ab) for ab in layer.flag_branches],
            "early_exit": layer.early_exit,
        })
    return {
        "format": 1,
        "code": code_to_json(protocol.code),
        "method": protocol.method,
        "pool_mode": protocol.pool_mode,
        "prep": to_text(protocol.prep).splitlines(),
        "layers": layers,
    }


def protocol_from_json(d: dict) -> DetFtProtocol:
    if d.get("format") != 1:
        raise ValueError("unsupported protocol format")
    code = code_from_json(d["code"])
    prep = from_text("\n".join(d["prep"]), width=code.n, cbits=0)
    layers = []
    for ld in d["layers"]:
        vl = VerificationLayer(
            PauliKind(ld["detects"]),
            tuple(_meas_from_json(m) for m in ld["measurements"]),
            int(ld["u"]),
            int(ld["v"]),
            tuple(UnsatWitness.from_json(w) for w in ld["witnesses"]),
        )
        layers.append(ProtocolLayer(
            vl,
            tuple(_armed_from_json(b) for b in ld["branches"]),
            tuple(_armed_from_json(b) for b in ld["flag_branches"]),
            bool(ld["early_exit"]),
        ))
    return DetFtProtocol(code, prep, tuple(layers),
                         str(d["method"]), str(d["pool_mode"]))
