import pytest

from artifact.circuitir import CNOT, MEASX, MEASZ, PREPX, PREPZ, Circuit, Fault, propagate
from artifact.csscode import PauliKind, catalog
from artifact.f2core import BitVector
from artifact.flagsynth import (
    MeasurementGadget,
    flag_measurements,
    needs_flag,
    synth_hook_corrections,
)
from artifact.prepsynth import residual_classes, synth_prep
from artifact.verifsynth import VerificationMeasurement


def gadget(kind, support, flagged, n=9):
    m = VerificationMeasurement(
        kind, BitVector.from_support(n, support), flagged,
        ancilla=n, cbit=0, flag_ancilla=n + 1, flag_cbit=1,
    )
    return MeasurementGadget(m)


def hook_set_by_propagation(g, n=9):
    """Independently replay every internal ancilla fault."""
    gates = g.gates()
    circ = Circuit(n + 2, gates, cbits=2, fragment=True)
    anc = 1 << n
    full = BitVector.from_support(n + 2, g.support.support()).bits
    got = set()
    for loc in range(len(gates)):
        if g.kind is PauliKind.Z:
            f = Fault(loc, BitVector(n + 2), BitVector(n + 2, anc), None)
        else:
            f = Fault(loc, BitVector(n + 2, anc), BitVector(n + 2), None)
        r = propagate(circ, f)
        res = (r.residual_z if g.kind is PauliKind.Z else r.residual_x).bits
        res &= (1 << n) - 1
        flagged = bool((r.measurement_flips.bits >> 1) & 1) if g.flagged else False
        if res and res != full:
            got.add((res, flagged))
    return got


class TestGateEmission:
    def test_z_gadget_layout(self):
        g = gadget(PauliKind.Z, (0, 4, 5), True)
        kinds = [gt.kind for gt in g.gates()]
        assert kinds == [PREPZ, PREPX, CNOT, CNOT, CNOT, CNOT, CNOT, MEASX, MEASZ]
        data_cnots = [gt for gt in g.gates() if gt.kind == CNOT and gt.qubits[0] < 9]
        assert [gt.qubits for gt in data_cnots] == [(0, 9), (4, 9), (5, 9)]
        flag_cnots = [gt for gt in g.gates() if gt.kind == CNOT and gt.qubits[0] == 10]
        assert [gt.qubits for gt in flag_cnots] == [(10, 9), (10, 9)]

    def test_x_gadget_mirrored(self):
        g = gadget(PauliKind.X, (0, 4, 5), True)
        kinds = [gt.kind for gt in g.gates()]
        assert kinds == [PREPX, PREPZ, CNOT, CNOT, CNOT, CNOT, CNOT, MEASZ, MEASX]
        # ancilla drives every coupling
        for gt in g.gates():
            if gt.kind == CNOT:
                assert gt.qubits[0] == 9

    def test_unflagged_layout(self):
        g = gadget(PauliKind.Z, (1, 7), False)
        kinds = [gt.kind for gt in g.gates()]
        assert kinds == [PREPZ, CNOT, CNOT, MEASZ]

    def test_needs_allocation(self):
        m = VerificationMeasurement(PauliKind.Z, BitVector.from_support(9, (0, 1)))
        with pytest.raises(ValueError):
            MeasurementGadget(m).gates()
        m2 = VerificationMeasurement(
            PauliKind.Z, BitVector.from_support(9, (0, 1)), True,
            ancilla=9, cbit=0,
        )
        with pytest.raises(ValueError):
            MeasurementGadget(m2).gates()

    def test_weight_one_rejected(self):
        m = VerificationMeasurement(PauliKind.Z, BitVector.from_support(9, (3,)))
        with pytest.raises(ValueError):
            MeasurementGadget(m)


class TestHookErrors:
    @pytest.mark.parametrize("kind", [PauliKind.Z, PauliKind.X])
    @pytest.mark.parametrize("support,flagged", [
        ((0, 4, 5), False),
        ((0, 4, 5), True),
        ((0, 2), True),
        ((1, 3, 5, 7), True),
        ((0, 1, 2, 3, 8), True),
    ])
    def test_matches_propagation(self, kind, support, flagged):
        g = gadget(kind, support, flagged)
        want = {(h.residual.bits, h.flagged) for h in g.hook_errors()}
        assert want == hook_set_by_propagation(g)

    def test_suffix_structure(self):
        g = gadget(PauliKind.Z, (1, 3, 5, 7), True)
        hooks = g.hook_errors()
        assert [(h.cut, h.residual.support(), h.flagged) for h in hooks] == [
            (1, (3, 5, 7), False),
            (1, (3, 5, 7), True),
            (2, (5, 7), True),
            (3, (7,), True),
            (3, (7,), False),
        ]

    def test_unflagged_cuts(self):
        g = gadget(PauliKind.Z, (0, 4, 5), False)
        assert [(h.cut, h.residual.support()) for h in g.hook_errors()] == [
            (1, (4, 5)), (2, (5,)),
        ]
        assert not any(h.flagged for h in g.hook_errors())


class TestFlagPolicy:
    CASES = [
        ("steane", (2, 4, 5), False),
        ("steane", (1, 4, 6), True),
        ("surface9", (0, 4, 5), True),
        ("shor", (0, 2), False),
        ("shor", (0, 3, 6), True),
        ("tetrahedral15", (4, 9, 14), True),
    ]

    @pytest.mark.parametrize("name,support,expected", CASES)
    def test_frozen_decisions(self, name, support, expected):
        code = catalog(name)
        escape = residual_classes(synth_prep(code), code, PauliKind.Z)
        sup = BitVector.from_support(code.n, support)
        assert needs_flag(code, PauliKind.Z, sup, escape) is expected

    def test_escape_set_matters(self):
        # without the circuit-equivalence escape the Steane pick is flagged too
        code = catalog("steane")
        sup = BitVector.from_support(7, (2, 4, 5))
        assert needs_flag(code, PauliKind.Z, sup) is True

    def test_flag_measurements_helper(self):
        code = catalog("shor")
        escape = residual_classes(synth_prep(code), code, PauliKind.Z)
        meas = (
            VerificationMeasurement(PauliKind.Z, BitVector.from_support(9, (0, 2))),
            VerificationMeasurement(PauliKind.Z, BitVector.from_support(9, (0, 3, 6))),
        )
        flagged = flag_measurements(code, meas, escape)
        assert [m.flagged for m in flagged] == [False, True]


class TestHookCorrections:
    @pytest.mark.parametrize("name,support", [
        ("surface9", (0, 4, 5)),
        ("shor", (0, 3, 6)),
        ("tetrahedral15", (4, 9, 14)),
    ])
    def test_flag_branches_need_no_measurements(self, name, support):
        code = catalog(name)
        m = VerificationMeasurement(
            PauliKind.Z, BitVector.from_support(code.n, support), True,
        )
        br = synth_hook_corrections(code, MeasurementGadget(m))
        assert (br.u, br.v) == (0, 0)
        assert br.recovery[()].is_zero()
        # hooks the flag sees really are harmless after no correction at all
        group = code.reduction_group(PauliKind.Z)
        for h in MeasurementGadget(m).hook_errors():
            if h.flagged:
                assert group.reduced_weight(h.residual) <= 1

    def test_unflagged_gadget_rejected(self):
        code = catalog("shor")
        m = VerificationMeasurement(PauliKind.Z, BitVector.from_support(9, (0, 2)))
        with pytest.raises(ValueError):
            synth_hook_corrections(code, MeasurementGadget(m))
