import pytest
from hypothesis import given, strategies as st

from artifact.circuitir import (
    Circuit,
    ClassicalCondition,
    Fault,
    Gate,
    cnot,
    corr_x,
    fault_locations,
    from_text,
    meas_x,
    meas_z,
    prep_x,
    prep_z,
    propagate,
    stabilizer_flow,
    to_text,
)
from artifact.f2core import BitVector, rank, rref


def bv(n, *support):
    return BitVector.from_support(n, support)


class TestConstruction:
    def test_unprepared_qubit_rejected(self):
        with pytest.raises(ValueError, match="before preparation"):
            Circuit(2, [prep_z(0), cnot(0, 1)])

    def test_fragment_allows_unprepared(self):
        c = Circuit(2, [cnot(0, 1)], fragment=True)
        assert len(c) == 1

    def test_cbit_double_write_rejected(self):
        with pytest.raises(ValueError, match="written twice"):
            Circuit(1, [prep_z(0), meas_z(0, 0), meas_z(0, 0)], cbits=1)

    def test_condition_must_read_written_bits(self):
        cond = ClassicalCondition(BitVector.from_string("1"), BitVector.from_string("1"))
        with pytest.raises(ValueError, match="unwritten"):
            Circuit(1, [prep_z(0), corr_x(0, cond)], cbits=1)

    def test_condition_value_inside_mask(self):
        with pytest.raises(ValueError, match="outside its mask"):
            ClassicalCondition(BitVector.from_string("10"), BitVector.from_string("01"))

    def test_cnot_same_qubit_rejected(self):
        with pytest.raises(ValueError):
            cnot(3, 3)


def three_qubit_chain():
    # prep all, then entangle 0 -> 1 -> 2, then measure 2
    return Circuit(
        3,
        [prep_z(0), prep_z(1), prep_z(2), cnot(0, 1), cnot(1, 2), meas_z(2, 0)],
        cbits=1,
    )


class TestPropagate:
    def test_x_on_control_spreads(self):
        c = three_qubit_chain()
        f = Fault(2, bv(3, 0), bv(3))  # X on qubit 0 after the last prep
        res = propagate(c, f)
        assert res.residual_x == bv(3, 0, 1, 2)
        assert res.residual_z.is_zero()
        assert res.measurement_flips == BitVector.from_string("1")

    def test_z_on_target_spreads_backward(self):
        c = Circuit(2, [prep_x(0), prep_x(1), cnot(0, 1)])
        f = Fault(1, bv(2), bv(2, 1))
        res = propagate(c, f)
        assert res.residual_z == bv(2, 0, 1)
        assert res.residual_x.is_zero()

    def test_prep_resets_frame(self):
        c = Circuit(2, [prep_z(0), prep_z(1)])
        f = Fault(0, bv(2, 1), bv(2))  # X on qubit 1 before its prep
        res = propagate(c, f)
        assert res.residual_x.is_zero()

    def test_measurement_flip_only_touches_cbit(self):
        c = three_qubit_chain()
        f = Fault(5, bv(3), bv(3), flip=0)
        res = propagate(c, f)
        assert res.residual_x.is_zero() and res.residual_z.is_zero()
        assert res.measurement_flips.get(0) == 1

    def test_measx_reads_z_frame(self):
        c = Circuit(1, [prep_x(0), meas_x(0, 0)], cbits=1)
        res = propagate(c, Fault(0, bv(1), bv(1, 0)))
        assert res.measurement_flips.get(0) == 1

    def test_correction_gate_is_frame_transparent(self):
        cond = ClassicalCondition(BitVector.from_string("1"), BitVector.from_string("1"))
        c = Circuit(1, [prep_z(0), meas_z(0, 0), corr_x(0, cond)], cbits=1)
        res = propagate(c, Fault(0, bv(1, 0), bv(1)))
        assert res.residual_x == bv(1, 0)

    @given(st.integers(0, 5), st.integers(0, 7), st.integers(0, 7),
           st.integers(0, 7), st.integers(0, 7))
    def test_linearity_at_fixed_location(self, loc, x1, z1, x2, z2):
        c = three_qubit_chain()
        f1 = Fault(loc, BitVector(3, x1), BitVector(3, z1))
        f2 = Fault(loc, BitVector(3, x2), BitVector(3, z2))
        f12 = Fault(loc, BitVector(3, x1 ^ x2), BitVector(3, z1 ^ z2))
        r1, r2, r12 = propagate(c, f1), propagate(c, f2), propagate(c, f12)
        assert r1.residual_x ^ r2.residual_x == r12.residual_x
        assert r1.residual_z ^ r2.residual_z == r12.residual_z
        assert r1.measurement_flips ^ r2.measurement_flips == r12.measurement_flips


class TestFaultLocations:
    def test_counts(self):
        c = three_qubit_chain()
        faults = fault_locations(c)
        # 3 preps x 2 + 2 CNOTs x 6 + 1 measurement flip
        assert len(faults) == 3 * 2 + 2 * 6 + 1

    def test_single_kind_per_fault(self):
        for f in fault_locations(three_qubit_chain()):
            assert not (f.pauli_x.weight() and f.pauli_z.weight())

    def test_measurement_gets_flip_only(self):
        c = Circuit(1, [prep_z(0), meas_z(0, 0)], cbits=1)
        flips = [f for f in fault_locations(c) if f.flip is not None]
        assert len(flips) == 1
        assert flips[0].pauli_x.is_zero() and flips[0].pauli_z.is_zero()


class TestStabilizerFlow:
    def test_prep_only(self):
        xm, zm = stabilizer_flow(Circuit(2, [prep_z(0), prep_x(1)]))
        assert zm.row(0) == bv(2, 0) and xm.row(0).is_zero()
        assert xm.row(1) == bv(2, 1) and zm.row(1).is_zero()

    def test_bell_pair(self):
        xm, zm = stabilizer_flow(Circuit(2, [prep_x(0), prep_z(1), cnot(0, 1)]))
        assert xm.row(0) == bv(2, 0, 1) and zm.row(0).is_zero()
        assert zm.row(1) == bv(2, 0, 1) and xm.row(1).is_zero()

    def test_full_rank(self):
        c = Circuit(3, [prep_x(0), prep_z(1), prep_z(2), cnot(0, 1), cnot(1, 2)])
        xm, zm = stabilizer_flow(c)
        stacked = xm.stack(zm)
        # symplectic generators of a stabilizer state: x and z parts jointly
        # have rank equal to the width
        assert rank(stacked) == 3

    def test_rejects_measurement(self):
        with pytest.raises(ValueError):
            stabilizer_flow(Circuit(1, [prep_z(0), meas_z(0, 0)], cbits=1))

    def test_rejects_double_prep(self):
        with pytest.raises(ValueError):
            stabilizer_flow(Circuit(1, [prep_z(0), prep_z(0)]))


class TestTextFormat:
    def test_roundtrip(self):
        cond = ClassicalCondition(BitVector.from_string("11"), BitVector.from_string("10"))
        c = Circuit(
            3,
            [prep_z(0), prep_x(1), prep_z(2), cnot(1, 0), meas_z(0, 0),
             meas_x(1, 1), corr_x(2, cond)],
            cbits=2,
        )
        text = to_text(c)
        assert "CNOT 1 0" in text
        assert "MEASZ 0 -> m0" in text
        assert "CORRX 2 IF 11=10" in text
        again = from_text(text)
        assert again == c

    def test_comments_and_blanks(self):
        c = from_text("# a comment\nPREPZ 0\n\nMEASZ 0 -> m0  # trailing\n")
        assert len(c) == 2 and c.cbits == 1

    def test_parse_error_reports_line(self):
        with pytest.raises(ValueError, match="line 2"):
            from_text("PREPZ 0\nBADGATE 1")
