"""Ancilla gadgets for stabilizer measurements and their hook errors.

A weight-w measurement runs w couplings through one ancilla. A single
ancilla fault between couplings walks out onto the tail of the data
support: the hook errors. When some hook is neither light enough to ride
through the final correction round nor equivalent to an error the earlier
circuit can already produce, the gadget gets a flag qubit wired across the
middle couplings; the flag bit then catches exactly the hooks that matter,
and a dedicated correction branch repairs them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

from .circuitir import Gate, cnot, meas_x, meas_z, prep_x, prep_z
from .corrsynth import CorrectionBranch, ErrorClass, synth_correction
from .csscode import CssCode, PauliKind, residual_weight_limits
from .f2core import BitVector
from .verifsynth import VerificationMeasurement


@dataclass(frozen=True)
class HookError:
    """Residual left on the data block by one internal ancilla fault."""

    cut: int             # number of data couplings already done
    residual: BitVector
    flagged: bool        # whether the gadget's flag bit sees this fault


class MeasurementGadget:
    """Gate-level realization of one VerificationMeasurement."""

    __slots__ = ("measurement",)

    def __init__(self, measurement: VerificationMeasurement):
        if measurement.support.weight() < 2:
            raise ValueError("gadgets need support weight at least 2")
        self.measurement = measurement

    @property
    def kind(self) -> PauliKind:
        return self.measurement.kind

    @property
    def support(self) -> BitVector:
        return self.measurement.support

    @property
    def flagged(self) -> bool:
        return self.measurement.flagged

    def data_couplings(self) -> tuple:
        return self.measurement.support.support()

    def gates(self) -> list:
        """Fragment gates; requires the measurement to carry its ancilla
        and classical bit assignments (the flag pair too when flagged)."""
        m = self.measurement
        if m.ancilla is None or m.cbit is None:
            raise ValueError("gadget emitted before ancilla allocation")
        if m.flagged and (m.flag_ancilla is None or m.flag_cbit is None):
            raise ValueError("flagged gadget emitted before flag allocation")
        qs = self.data_couplings()
        out = []
        if m.kind is PauliKind.Z:
            couple = lambda q: cnot(q, m.ancilla)
            guard = lambda: cnot(m.flag_ancilla, m.ancilla)
            out.append(prep_z(m.ancilla))
            if m.flagged:
                out.append(prep_x(m.flag_ancilla))
        else:
            couple = lambda q: cnot(m.ancilla, q)
            guard = lambda: cnot(m.ancilla, m.flag_ancilla)
            out.append(prep_x(m.ancilla))
            if m.flagged:
                out.append(prep_z(m.flag_ancilla))
        out.append(couple(qs[0]))
        if m.flagged:
            out.append(guard())
        for q in qs[1:-1]:
            out.append(couple(q))
        if m.flagged:
            out.append(guard())
        out.append(couple(qs[-1]))
        if m.flagged:
            if m.kind is PauliKind.Z:
                out.append(meas_x(m.flag_ancilla, m.flag_cbit))
            else:
                out.append(meas_z(m.flag_ancilla, m.flag_cbit))
        if m.kind is PauliKind.Z:
            out.append(meas_z(m.ancilla, m.cbit))
        else:
            out.append(meas_x(m.ancilla, m.cbit))
        return out

    def hook_errors(self) -> list:
        """Every nontrivial ancilla-fault residual, with flag visibility.

        The fault right after the first coupling escapes both flag
        couplings but equals the first qubit modulo the measured operator;
        the one after the second flag coupling is plain weight one. Cuts
        in between are seen by the flag.
        """
        n = self.support.length
        qs = self.data_couplings()
        w = len(qs)
        hooks = []
        for cut in range(1, w):
            res = BitVector.from_support(n, qs[cut:])
            if self.flagged:
                if cut == 1:
                    hooks.append(HookError(1, res, False))
                    hooks.append(HookError(1, res, True))
                elif cut == w - 1:
                    hooks.append(HookError(cut, res, True))
                    hooks.append(HookError(cut, res, False))
                else:
                    hooks.append(HookError(cut, res, True))
            else:
                hooks.append(HookError(cut, res, False))
        return hooks


def needs_flag(code: CssCode, meas_kind: PauliKind, support: BitVector,
               escape_labels: frozenset = frozenset(),
               threshold: Optional[int] = None) -> bool:
    """Would measuring this operator unflagged create a harmful hook?

    Hooks share the kind of the measured operator. A hook is harmful when
    its reduced weight over the plain stabilizer group exceeds the budget
    and its coset is not among `escape_labels`, the cosets the surrounding
    circuit already produces (those are repaired by existing branches).
    """
    group = code.reduction_group(meas_kind, mode="code")
    if threshold is None:
        limits = residual_weight_limits(code)
        threshold = limits[0] if meas_kind is PauliKind.X else limits[1]
    probe = MeasurementGadget(VerificationMeasurement(meas_kind, support))
    for hook in probe.hook_errors():
        if group.reduced_weight(hook.residual) <= threshold:
            continue
        if group.label(hook.residual) in escape_labels:
            continue
        return True
    return False


def flag_measurements(code: CssCode, measurements: Iterable,
                      escape_labels: frozenset = frozenset(),
                      threshold: Optional[int] = None) -> tuple:
    """Copy of the measurements with the flag decision applied to each."""
    return tuple(
        m.with_flag(needs_flag(code, m.kind, m.support, escape_labels, threshold))
        for m in measurements
    )


def synth_hook_corrections(code: CssCode, gadget: MeasurementGadget,
                           pool_mode: str = "state", max_u: int = 4,
                           budget: Optional[float] = None) -> CorrectionBranch:
    """Correction branch to run when this gadget's flag bit fires.

    Members are the flag-visible hooks plus the zero class (a fault on the
    flag qubit itself fires the bit with clean data).
    """
    if not gadget.flagged:
        raise ValueError("only flagged gadgets have a flag branch")
    members = tuple(h.residual for h in gadget.hook_errors() if h.flagged)
    eclass = ErrorClass((1,), members)
    return synth_correction(
        code, eclass, gadget.kind,
        pool_mode=pool_mode, max_u=max_u, budget=budget,
    )
