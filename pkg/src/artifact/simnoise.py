"""Validation of assembled protocols: exhaustive fault injection and noise.

Two independent execution routes exist on purpose. The exhaustive checker
replays faults algebraically (frame propagation plus inner products), while
the Monte Carlo engine executes gates one by one on vectorized bit arrays
with masked conditional branches. The engine accepts deterministic fault
injection so the two routes can be compared location by location.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .circuitir import CNOT, MEASX, MEASZ, PREPX, PREPZ, propagate
from .csscode import PauliKind, build_lookup_decoder, residual_weight_limits
from .f2core import BitVector
from .flagsynth import MeasurementGadget
from .prepsynth import verify_prep
from .protocol import (DetFtProtocol, joint_fault_locations,
                       unconditional_circuit)

_ONE = np.uint64(1)

# parity of a 16-bit word, folded into from wider lanes
_PAR16 = np.zeros(1 << 16, dtype=np.uint8)
for _i in range(1, 1 << 16):
    _PAR16[_i] = _PAR16[_i >> 1] ^ (_i & 1)


def _parity64(v: np.ndarray) -> np.ndarray:
    v = v ^ (v >> np.uint64(32))
    v = v ^ (v >> np.uint64(16))
    return _PAR16[(v & np.uint64(0xFFFF)).astype(np.intp)]


# ---------------------------------------------------------------------------
# exhaustive single-fault replay


@dataclass(frozen=True)
class Violation:
    fault: str
    stage: str      # "residual" or "logical"
    kind: str
    weight: int
    support: tuple
    trace: tuple

    def __str__(self):
        steps = "; ".join(self.trace) or "no branch fired"
        return (f"{self.stage} {self.kind}{list(self.support)} "
                f"(reduced weight {self.weight}) after {self.fault} [{steps}]")


def _replay(protocol: DetFtProtocol, flat, fault):
    """Run one fault through the protocol, branches executing faultlessly.

    A faultless gadget measures exactly the inner product of its support
    with the current residual, so branch outcomes are pure arithmetic.
    """
    n = protocol.code.n
    data = (1 << n) - 1
    res = propagate(flat, fault)
    rx = res.residual_x.bits & data
    rz = res.residual_z.bits & data
    measured = res.measurement_flips.bits
    trace = []
    for li, layer in enumerate(protocol.layers):
        hit = False
        for ab in layer.flag_branches + layer.branches:
            if not ab.condition.holds(measured):
                continue
            hit = True
            br = ab.branch
            cur = rx if br.detects is PauliKind.X else rz
            outcome = tuple((cur & m.support.bits).bit_count() & 1
                            for m in br.measurements)
            label = (f"flag of m{layer.measurements[ab.flag_of].cbit}"
                     if ab.flag_of is not None
                     else "b=" + "".join(map(str, br.trigger)))
            corr = br.recovery.get(outcome)
            if corr is None:
                trace.append(f"layer {li} {label}: outcome {outcome} unmapped")
                continue
            if br.detects is PauliKind.X:
                rx ^= corr.bits
            else:
                rz ^= corr.bits
            trace.append(
                f"layer {li} {label}: outcome "
                f"{''.join(map(str, outcome)) or '-'} -> "
                f"{br.detects.value}{sorted(corr.support())}")
        if hit and layer.early_exit:
            break
    return rx, rz, tuple(trace)


def exhaustive_single_fault_check(protocol: DetFtProtocol) -> list:
    """Every single-location fault, including joint two-qubit Paulis and
    outcome flips, must leave per-kind residuals within the weight budget
    and cause no logical flip after one round of perfect error correction.

    Branch-internal faults are excluded: a branch only runs once another
    fault has fired it, which puts those combinations at order two. The
    returned list is empty exactly when the protocol passes.
    """
    code = protocol.code
    n = code.n
    if not verify_prep(protocol.prep, code):
        raise ValueError("preparation circuit does not fix the target state")
    flat = unconditional_circuit(protocol)
    limits = residual_weight_limits(code)
    groups = {k: code.reduction_group(k, "state") for k in PauliKind}
    dec = build_lookup_decoder(code, PauliKind.X)
    lz_masks = code.lz.row_masks()
    out = []
    for fault in joint_fault_locations(flat):
        rx, rz, trace = _replay(protocol, flat, fault)
        desc = fault.describe(flat)
        for kind, bits, lim in ((PauliKind.X, rx, limits[0]),
                                (PauliKind.Z, rz, limits[1])):
            w = groups[kind].reduced_weight(BitVector(n, bits))
            if w > lim:
                out.append(Violation(desc, "residual", kind.value, w,
                                     tuple(BitVector(n, bits).support()),
                                     trace))
        # Z errors act trivially on the prepared state once inside the
        # stabilizer-plus-logical span, which perfect EC guarantees; only
        # the X side has a logical failure mode here.
        fixed = rx ^ dec.decode(dec.syndrome_of(BitVector(n, rx))).bits
        if any((fixed & m).bit_count() & 1 for m in lz_masks):
            out.append(Violation(desc, "logical", "X",
                                 bin(fixed).count("1"),
                                 tuple(BitVector(n, fixed).support()),
                                 trace))
    return out


# ---------------------------------------------------------------------------
# Monte Carlo engine


@dataclass(frozen=True)
class NoiseModel:
    """Depolarizing circuit noise: every location fails with probability p.

    One-qubit gate locations draw from the 3 nontrivial Paulis, CNOTs from
    the 15 nontrivial pairs, measurements flip their outcome, and applied
    correction Paulis count as one-qubit locations. The toggles exist so a
    category can be switched off entirely.
    """

    p: float
    prep: bool = True
    cnot: bool = True
    measure: bool = True
    correction: bool = True

    def scaled(self, p: float) -> "NoiseModel":
        return NoiseModel(p, self.prep, self.cnot, self.measure,
                          self.correction)


@dataclass(frozen=True)
class SimResult:
    p: float
    shots: int
    errors: int
    seed: int
    ci: tuple  # 95% interval on the rate

    @property
    def ler(self) -> float:
        return self.errors / self.shots if self.shots else 0.0


def _ci95(errors: int, shots: int) -> tuple:
    if shots == 0:
        return (0.0, 1.0)
    q = errors / shots
    if errors >= 20:
        half = 1.96 * (q * (1.0 - q) / shots) ** 0.5
        return (max(q - half, 0.0), min(q + half, 1.0))
    from scipy.stats import beta

    low = 0.0 if errors == 0 else float(beta.ppf(0.025, errors,
                                                 shots - errors + 1))
    high = 1.0 if errors == shots else float(beta.ppf(0.975, errors + 1,
                                                      shots - errors))
    return (low, high)


class _Engine:
    """Vectorized gate-by-gate executor over uint64 bit planes."""

    def __init__(self, protocol: DetFtProtocol):
        if protocol.width > 63:
            raise ValueError("engine handles at most 63 qubits")
        code = protocol.code
        self.n = code.n
        flat = unconditional_circuit(protocol)
        self.flat_ops = [self._op(g) for g in flat.gates]
        self.layers = []
        for layer in protocol.layers:
            armed = []
            for ab in layer.flag_branches + layer.branches:
                prog = [self._op(g) for m in ab.branch.measurements
                        for g in MeasurementGadget(m).gates()]
                armed.append((
                    np.uint64(ab.condition.mask.bits),
                    np.uint64(ab.condition.value.bits),
                    prog,
                    [m.cbit for m in ab.branch.measurements],
                    sorted((sum(b << j for j, b in enumerate(k)), v.bits)
                           for k, v in ab.branch.recovery.items()),
                    ab.branch.detects,
                ))
            self.layers.append((armed, layer.early_exit))
        dec = build_lookup_decoder(code, PauliKind.X)
        self.dec_table = np.zeros(1 << len(code.hz.rows), dtype=np.uint64)
        for syn, corr in dec.table.items():
            self.dec_table[syn] = corr.bits
        self.hz_masks = [np.uint64(m) for m in code.hz.row_masks()]
        self.lz_masks = [np.uint64(m) for m in code.lz.row_masks()]

    @staticmethod
    def _op(g):
        if g.kind in (PREPZ, PREPX):
            return ("P", g.qubits[0])
        if g.kind == CNOT:
            return ("C", g.qubits[0], g.qubits[1])
        if g.kind == MEASZ:
            return ("MZ", g.qubits[0], g.cbit)
        if g.kind == MEASX:
            return ("MX", g.qubits[0], g.cbit)
        raise ValueError(f"engine cannot execute {g.kind}")

    def _dep1(self, q, st, sel, p, rng):
        rx, rz, _ = st
        hit = rng.random(rx.shape[0]) < p
        pat = rng.integers(1, 4, rx.shape[0]).astype(np.uint64)
        if sel is not None:
            hit &= sel
        h = hit.astype(np.uint64)
        rx ^= (h * (pat & _ONE)) << np.uint64(q)
        rz ^= (h * ((pat >> _ONE) & _ONE)) << np.uint64(q)

    def _dep2(self, c, t, st, sel, p, rng):
        rx, rz, _ = st
        hit = rng.random(rx.shape[0]) < p
        pat = rng.integers(1, 16, rx.shape[0]).astype(np.uint64)
        if sel is not None:
            hit &= sel
        h = hit.astype(np.uint64)
        rx ^= (h * (pat & _ONE)) << np.uint64(c)
        rz ^= (h * ((pat >> _ONE) & _ONE)) << np.uint64(c)
        rx ^= (h * ((pat >> np.uint64(2)) & _ONE)) << np.uint64(t)
        rz ^= (h * ((pat >> np.uint64(3)) & _ONE)) << np.uint64(t)

    def _run_ops(self, ops, st, sel, noise, rng, inject=None):
        rx, rz, cb = st
        B = rx.shape[0]
        p = noise.p
        selu = None if sel is None else sel.astype(np.uint64)
        for idx, op in enumerate(ops):
            kind = op[0]
            if kind == "P":
                q = op[1]
                if sel is None:
                    keep = np.uint64(~(1 << q) & 0xFFFFFFFFFFFFFFFF)
                    rx &= keep
                    rz &= keep
                else:
                    clear = ~(selu << np.uint64(q))
                    rx &= clear
                    rz &= clear
                if noise.prep and p > 0:
                    self._dep1(q, st, sel, p, rng)
            elif kind == "C":
                c, t = op[1], op[2]
                bc = (rx >> np.uint64(c)) & _ONE
                bt = (rz >> np.uint64(t)) & _ONE
                if sel is not None:
                    bc &= selu
                    bt &= selu
                rx ^= bc << np.uint64(t)
                rz ^= bt << np.uint64(c)
                if noise.cnot and p > 0:
                    self._dep2(c, t, st, sel, p, rng)
            else:
                q, c = op[1], op[2]
                bit = (rx >> np.uint64(q)) & _ONE if kind == "MZ" \
                    else (rz >> np.uint64(q)) & _ONE
                if inject is not None and inject[0] == idx and inject[3]:
                    bit = bit ^ _ONE
                if noise.measure and p > 0:
                    flip = (rng.random(B) < p).astype(np.uint64)
                    bit = bit ^ flip
                if sel is not None:
                    bit = bit & selu
                cb |= bit << np.uint64(c)
            if inject is not None and inject[0] == idx:
                rx ^= np.uint64(inject[1])
                rz ^= np.uint64(inject[2])

    def run_batch(self, B, noise, rng, inject=None):
        """Returns (logical failure, pre-EC x, pre-EC z, classical bits).

        The failure flag reflects one round of perfect error correction;
        the returned residuals are from just before it. `inject` is
        (flat op index, x mask, z mask, flip own outcome) and lands after
        that operation in every shot; it exists so exhaustive replay and
        this engine can be diffed location by location.
        """
        rx = np.zeros(B, np.uint64)
        rz = np.zeros(B, np.uint64)
        cb = np.zeros(B, np.uint64)
        st = (rx, rz, cb)
        live = np.ones(B, bool)
        self._run_ops(self.flat_ops, st, None, noise, rng, inject)
        for armed, early in self.layers:
            fired = np.zeros(B, bool)
            for mask, value, prog, obits, recovery, detects in armed:
                sel = live & ((cb & mask) == value)
                fired |= sel
                if not sel.any():
                    continue
                self._run_ops(prog, st, sel, noise, rng)
                o = np.zeros(B, np.uint64)
                for j, c in enumerate(obits):
                    o |= ((cb >> np.uint64(c)) & _ONE) << np.uint64(j)
                for oint, corr in recovery:
                    if not corr:
                        continue
                    ssel = sel & (o == np.uint64(oint))
                    if not ssel.any():
                        continue
                    h = ssel.astype(np.uint64)
                    if detects is PauliKind.X:
                        rx ^= h * np.uint64(corr)
                    else:
                        rz ^= h * np.uint64(corr)
                    if noise.correction and noise.p > 0:
                        for q in range(corr.bit_length()):
                            if (corr >> q) & 1:
                                self._dep1(q, st, ssel, noise.p, rng)
            if early:
                live &= ~fired
        data = np.uint64((1 << self.n) - 1)
        rx &= data
        rz &= data
        syn = np.zeros(B, np.intp)
        for i, m in enumerate(self.hz_masks):
            syn |= _parity64(rx & m).astype(np.intp) << i
        fixed = rx ^ self.dec_table[syn]
        fail = np.zeros(B, bool)
        for m in self.lz_masks:
            fail |= _parity64(fixed & m).astype(bool)
        return fail, rx, rz, cb


def _rng_for(seed, batch_index):
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence((seed, batch_index))))


def estimate_ler(protocol: DetFtProtocol, p: float, shots: int,
                 seed: int = 0, noise: Optional[NoiseModel] = None,
                 batch: int = 1 << 14,
                 target_errors: Optional[int] = None) -> SimResult:
    """Sample the logical X failure rate of the prepared block.

    Each shot runs the full protocol under circuit noise, applies one
    round of perfect error correction, and fails when an X logical
    remains. Batches use independent counter-derived streams, so a given
    (seed, batch size) pair reproduces exactly. With `target_errors` the
    run stops at the first batch boundary past that many failures.
    """
    noise = NoiseModel(p) if noise is None else noise.scaled(p)
    eng = _Engine(protocol)
    done = errors = 0
    bi = 0
    while done < shots:
        size = min(batch, shots - done)
        fail, _, _, _ = eng.run_batch(size, noise, _rng_for(seed, bi))
        errors += int(fail.sum())
        done += size
        bi += 1
        if target_errors is not None and errors >= target_errors:
            break
    return SimResult(p, done, errors, seed, _ci95(errors, done))


def _sweep_point(args):
    protocol, p, shots, seed, noise, batch, target_errors, index = args
    return estimate_ler(protocol, p, shots, seed=seed + 1000003 * index,
                        noise=noise, batch=batch,
                        target_errors=target_errors)


def sweep_ler(protocol: DetFtProtocol, ps: Iterable[float], shots: int,
              seed: int = 0, noise: Optional[NoiseModel] = None,
              batch: int = 1 << 14, target_errors: Optional[int] = None,
              jobs: int = 1) -> list:
    """One estimate per physical rate; point seeds are derived from the
    base seed and the point index, so results do not depend on `jobs`."""
    work = [(protocol, p, shots, seed, noise, batch, target_errors, i)
            for i, p in enumerate(ps)]
    if jobs > 1 and len(work) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_sweep_point, work))
    return [_sweep_point(w) for w in work]


class InsufficientStatistics(Exception):
    """Too few well-sampled points to fit a scaling exponent."""


def fit_scaling(results: Iterable[SimResult], min_errors: int = 10) -> tuple:
    """(slope, intercept) of log(ler) against log(p), least squares.

    Points with fewer than `min_errors` failures are dropped first; fewer
    than three surviving points is an error, not a number.
    """
    pts = [(r.p, r.ler) for r in results
           if r.errors >= min_errors and r.shots and r.p > 0]
    if len(pts) < 3:
        raise InsufficientStatistics(
            f"{len(pts)} usable points (need 3); raise shots or p")
    xs = np.log([p for p, _ in pts])
    ys = np.log([l for _, l in pts])
    slope, intercept = np.polyfit(xs, ys, 1)
    return float(slope), float(intercept)


def results_to_csv(results: Iterable[SimResult], seed: Optional[int] = None,
                   noise: Optional[NoiseModel] = None) -> str:
    buf = io.StringIO()
    if seed is not None:
        buf.write(f"# seed={seed}\n")
    if noise is not None:
        buf.write(f"# noise=prep:{int(noise.prep)},cnot:{int(noise.cnot)},"
                  f"measure:{int(noise.measure)},"
                  f"correction:{int(noise.correction)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["p", "shots", "errors", "ler", "ci_low", "ci_high"])
    for r in results:
        w.writerow([f"{r.p:.6g}", r.shots, r.errors, f"{r.ler:.8g}",
                    f"{r.ci[0]:.8g}", f"{r.ci[1]:.8g}"])
    return buf.getvalue()
