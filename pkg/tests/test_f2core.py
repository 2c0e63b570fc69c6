import pytest
from hypothesis import given, settings, strategies as st

from artifact.f2core import (
    BitMatrix,
    BitVector,
    in_row_space,
    inner,
    kernel_basis,
    matmul_transpose,
    rank,
    row_space_masks,
    rref,
)

STEANE_HX = BitMatrix.from_strings(["11..11.", "1.1.1.1", "...1111"])


def bitvec(length, *support):
    return BitVector.from_support(length, support)


class TestBitVector:
    def test_roundtrip_string(self):
        v = BitVector.from_string("1.1..1")
        assert v.support() == (0, 2, 5)
        assert v.to_string() == "1.1..1"
        assert v.weight() == 3

    def test_zero_accepts_both_characters(self):
        assert BitVector.from_string("10.") == BitVector.from_string("1..")

    def test_xor(self):
        a = bitvec(7, 0, 1, 4, 5)
        b = bitvec(7, 0, 2, 4, 6)
        assert (a ^ b).support() == (1, 2, 5, 6)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            bitvec(3, 0) ^ bitvec(4, 0)
        with pytest.raises(ValueError):
            BitVector(3, 0b1000)

    def test_empty_vector(self):
        v = BitVector(0)
        assert v.weight() == 0 and v.to_string() == ""


class TestRref:
    def test_identity_fixed(self):
        eye = BitMatrix.identity(3)
        red, pivots, r = rref(eye)
        assert red == eye and pivots == (0, 1, 2) and r == 3

    def test_zero_matrix_keeps_shape(self):
        z = BitMatrix.zeros(2, 4)
        red, pivots, r = rref(z)
        assert red == z and pivots == () and r == 0

    def test_steane_rank(self):
        red, pivots, r = rref(STEANE_HX)
        assert r == 3
        assert pivots == (0, 1, 3)

    def test_dependent_rows_move_to_bottom(self):
        m = BitMatrix.from_strings(["11.", "11.", ".11"])
        red, pivots, r = rref(m)
        assert r == 2
        assert red.nrows == 3
        assert red.rows[2].is_zero()

    @given(
        st.lists(st.integers(min_value=0, max_value=(1 << 8) - 1), min_size=1, max_size=8)
    )
    def test_idempotent(self, masks):
        m = BitMatrix(8, [BitVector(8, b) for b in masks])
        once = rref(m).reduced
        twice = rref(once).reduced
        assert once == twice
        assert once.nrows == m.nrows


class TestInRowSpace:
    def test_row_itself(self):
        c = in_row_space(STEANE_HX, STEANE_HX.row(0))
        assert c == bitvec(3, 0)

    def test_combination_of_first_two_rows(self):
        v = bitvec(7, 1, 2, 5, 6)  # row0 xor row1
        c = in_row_space(STEANE_HX, v)
        assert c == bitvec(3, 0, 1)
        # the coefficients actually reproduce v
        acc = BitVector(7)
        for i in c.support():
            acc = acc ^ STEANE_HX.row(i)
        assert acc == v

    def test_unit_vector_outside(self):
        assert in_row_space(STEANE_HX, bitvec(7, 0)) is None

    @given(st.integers(min_value=0, max_value=7))
    def test_all_combinations_recovered(self, coeff_mask):
        v = BitVector(7)
        for i in range(3):
            if (coeff_mask >> i) & 1:
                v = v ^ STEANE_HX.row(i)
        c = in_row_space(STEANE_HX, v)
        assert c is not None
        acc = BitVector(7)
        for i in c.support():
            acc = acc ^ STEANE_HX.row(i)
        assert acc == v


class TestKernel:
    def test_dimension(self):
        k = kernel_basis(STEANE_HX)
        assert k.nrows == 7 - 3

    def test_rows_annihilate(self):
        k = kernel_basis(STEANE_HX)
        for kv in k.rows:
            for hr in STEANE_HX.rows:
                assert inner(kv, hr) == 0

    def test_full_rank_square_kernel_empty(self):
        assert kernel_basis(BitMatrix.identity(4)).nrows == 0

    @given(
        st.lists(st.integers(min_value=0, max_value=(1 << 6) - 1), min_size=1, max_size=6)
    )
    def test_kernel_rank_complements(self, masks):
        m = BitMatrix(6, [BitVector(6, b) for b in masks])
        k = kernel_basis(m)
        assert k.nrows == 6 - rank(m)
        for kv in k.rows:
            for r in m.rows:
                assert inner(kv, r) == 0


class TestInner:
    def test_examples(self):
        assert inner(bitvec(4, 0, 1), bitvec(4, 1, 2)) == 1
        assert inner(bitvec(4, 0, 1), bitvec(4, 0, 1)) == 0

    @given(
        st.integers(min_value=0, max_value=255),
        st.integers(min_value=0, max_value=255),
        st.integers(min_value=0, max_value=255),
    )
    def test_bilinear(self, a, b, c):
        u, v, w = BitVector(8, a), BitVector(8, b), BitVector(8, c)
        assert inner(u ^ v, w) == (inner(u, w) + inner(v, w)) % 2
        assert inner(u, v) == inner(v, u)


class TestHelpers:
    def test_matmul_transpose_orthogonality(self):
        prod = matmul_transpose(STEANE_HX, STEANE_HX)
        # Steane is self-dual-containing: hx . hx^T = 0
        assert all(r.is_zero() for r in prod.rows)

    def test_row_space_masks_count(self):
        masks = row_space_masks(STEANE_HX)
        assert len(masks) == 8
        assert masks[0] == 0

    def test_transpose_involution(self):
        t = STEANE_HX.transpose()
        assert t.nrows == 7 and t.ncols == 3
        assert t.transpose() == STEANE_HX
