import itertools

import pytest
from hypothesis import given, settings, strategies as st

from artifact.satcore import (
    SAT,
    TIMEOUT,
    UNSAT,
    CnfInstance,
    UnsatWitness,
    enumerate_models,
    make_unsat_witness,
    parse_dimacs,
    solve,
)


def brute_force_models(inst, projection):
    """Reference enumeration over all assignments (small instances only)."""
    seen = set()
    for bits in itertools.product([False, True], repeat=inst.nvars):
        assignment = {v: bits[v - 1] for v in range(1, inst.nvars + 1)}
        if inst.check_model(assignment):
            seen.add(tuple(assignment[v] for v in projection))
    return seen


class TestBasics:
    def test_single_unit(self):
        inst = CnfInstance()
        a = inst.new_var()
        inst.add_clause([a])
        out = solve(inst)
        assert out.is_sat and out.assignment[a] is True

    def test_contradiction(self):
        inst = CnfInstance()
        a = inst.new_var()
        inst.add_clause([a])
        inst.add_clause([-a])
        assert solve(inst).status == UNSAT

    def test_assumptions(self):
        inst = CnfInstance()
        a, b = inst.new_vars(2)
        inst.add_clause([a, b])
        assert solve(inst, assumptions=[-a]).assignment[b] is True
        assert solve(inst, assumptions=[-a, -b]).status == UNSAT

    def test_empty_clause_never_silent(self):
        inst = CnfInstance()
        inst.new_var()
        with pytest.raises(ValueError):
            inst.add_clause([])
        inst.add_empty_clause("explicit")
        assert solve(inst).status == UNSAT

    def test_literal_range_checked(self):
        inst = CnfInstance()
        inst.new_var()
        with pytest.raises(ValueError):
            inst.add_clause([2])

    def test_determinism(self):
        def build():
            inst = CnfInstance()
            vs = inst.new_vars(6)
            inst.add_clause([vs[0], vs[1], vs[2]])
            inst.add_clause([-vs[0], vs[3]])
            inst.add_xor(vs[2:5], 1)
            return inst, vs

        i1, v1 = build()
        i2, v2 = build()
        a1 = solve(i1).assignment
        a2 = solve(i2).assignment
        assert a1 == a2


class TestXor:
    @pytest.mark.parametrize("n,constant", [(1, 0), (1, 1), (2, 0), (2, 1), (3, 1), (5, 0)])
    def test_truth_table(self, n, constant):
        inst = CnfInstance()
        vs = inst.new_vars(n)
        inst.add_xor(vs, constant)
        models = brute_force_models(inst, vs)
        expected = {
            bits
            for bits in itertools.product([False, True], repeat=n)
            if sum(bits) % 2 == constant
        }
        assert models == expected

    def test_empty_odd_is_contradiction(self):
        inst = CnfInstance()
        inst.add_xor([], 1)
        assert solve(inst).status == UNSAT

    def test_empty_even_is_noop(self):
        inst = CnfInstance()
        inst.add_xor([], 0)
        assert solve(inst).is_sat

    def test_negated_literals(self):
        inst = CnfInstance()
        a, b = inst.new_vars(2)
        inst.add_xor([-a, b], 0)  # a != b is false, so a == b... with -a: parity(!a, b)=0
        for model in brute_force_models(inst, [a, b]):
            assert ((not model[0]) + model[1]) % 2 == 0


class TestCardinality:
    @pytest.mark.parametrize("n,k", [(4, 0), (4, 1), (4, 2), (6, 2), (6, 5), (5, 5)])
    def test_at_most_counts(self, n, k):
        inst = CnfInstance()
        vs = inst.new_vars(n)
        inst.add_at_most(vs, k)
        models, truncated = enumerate_models(inst, vs)
        assert not truncated
        got = {tuple(m[v] for v in vs) for m in models}
        expected = {
            bits
            for bits in itertools.product([False, True], repeat=n)
            if sum(bits) <= k
        }
        assert got == expected

    def test_at_most_small_brute_force(self):
        # small enough to sweep every assignment including counter registers
        inst = CnfInstance()
        vs = inst.new_vars(4)
        inst.add_at_most(vs, 1)
        models = brute_force_models(inst, vs)
        assert all(sum(m) <= 1 for m in models)
        assert {m for m in models} == {
            bits
            for bits in itertools.product([False, True], repeat=4)
            if sum(bits) <= 1
        }

    def test_at_least(self):
        inst = CnfInstance()
        vs = inst.new_vars(4)
        inst.add_at_least(vs, 3)
        models = brute_force_models(inst, vs)
        assert all(sum(m) >= 3 for m in models)
        assert len(models) == 4 + 1

    def test_pigeonhole_unsat(self):
        # 4 pigeons into 3 holes
        inst = CnfInstance()
        p = {(i, j): inst.new_var() for i in range(4) for j in range(3)}
        for i in range(4):
            inst.add_clause([p[i, j] for j in range(3)])
        for j in range(3):
            inst.add_at_most([p[i, j] for i in range(4)], 1)
        assert solve(inst).status == UNSAT


class TestEnumerate:
    def test_or_clause(self):
        inst = CnfInstance()
        a, b = inst.new_vars(2)
        inst.add_clause([a, b])
        models, truncated = enumerate_models(inst, [a, b])
        assert not truncated
        assert {tuple(m[v] for v in (a, b)) for m in models} == {
            (True, False), (False, True), (True, True)
        }

    def test_limit_sets_truncation(self):
        inst = CnfInstance()
        vs = inst.new_vars(3)
        inst.add_clause([vs[0], -vs[0]])  # tautology is dropped; instance is free
        models, truncated = enumerate_models(inst, vs, limit=3)
        assert len(models) == 3 and truncated

    def test_exactly_three_of_twelve_vs_brute_force(self):
        inst = CnfInstance()
        vs = inst.new_vars(12)
        inst.add_at_most(vs, 3)
        inst.add_at_least(vs, 3)
        models, truncated = enumerate_models(inst, vs)
        assert not truncated
        got = {tuple(m[v] for v in vs) for m in models}
        expected = {
            bits
            for bits in itertools.product([False, True], repeat=12)
            if sum(bits) == 3
        }
        assert got == expected
        assert len(got) == 220

    def test_enumeration_does_not_mutate(self):
        inst = CnfInstance()
        a = inst.new_var()
        inst.add_clause([a, a])
        before = len(inst.clauses)
        enumerate_models(inst, [a])
        assert len(inst.clauses) == before


class TestDimacs:
    def test_exact_format(self):
        inst = CnfInstance()
        a, b = inst.new_vars(2)
        inst.add_clause([a, -b])
        inst.add_clause([b])
        assert inst.to_dimacs() == "p cnf 2 2\n1 -2 0\n2 0\n"

    def test_roundtrip_preserves_status_and_text(self):
        inst = CnfInstance()
        vs = inst.new_vars(5)
        inst.add_xor(vs[:3], 1)
        inst.add_at_most(vs, 2)
        text = inst.to_dimacs()
        again = parse_dimacs(text)
        assert again.to_dimacs() == text
        assert solve(again).status == solve(inst).status

    def test_parse_rejects_garbage(self):
        with pytest.raises(ValueError):
            parse_dimacs("p cnf x y\n")
        with pytest.raises(ValueError):
            parse_dimacs("1 2 0\n")


class TestWitness:
    def test_reverify(self):
        inst = CnfInstance()
        a = inst.new_var()
        inst.add_clause([a])
        inst.add_clause([-a])
        out = solve(inst)
        w = make_unsat_witness("toy", inst, out)
        assert w.reverify()
        again = UnsatWitness.from_json(w.to_json())
        assert again.reverify()

    def test_witness_requires_unsat(self):
        inst = CnfInstance()
        a = inst.new_var()
        inst.add_clause([a])
        with pytest.raises(ValueError):
            make_unsat_witness("toy", inst, solve(inst))


class TestTimeout:
    def test_hard_instance_times_out(self):
        # 9 pigeons into 8 holes needs well over the first deadline check
        inst = CnfInstance()
        p = {(i, j): inst.new_var() for i in range(9) for j in range(8)}
        for i in range(9):
            inst.add_clause([p[i, j] for j in range(8)])
        for j in range(8):
            inst.add_at_most([p[i, j] for i in range(9)], 1)
        out = solve(inst, budget=1e-6)
        assert out.status == TIMEOUT


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_random_instances_match_brute_force(data):
    nvars = data.draw(st.integers(min_value=1, max_value=5))
    nclauses = data.draw(st.integers(min_value=1, max_value=10))
    inst = CnfInstance()
    vs = inst.new_vars(nvars)
    for _ in range(nclauses):
        width = data.draw(st.integers(min_value=1, max_value=3))
        lits = [
            data.draw(st.sampled_from(vs)) * data.draw(st.sampled_from([1, -1]))
            for _ in range(width)
        ]
        inst.add_clause(lits)
    expected = brute_force_models(inst, vs)
    out = solve(inst)
    assert out.is_sat == bool(expected)
    if out.is_sat:
        assert tuple(out.assignment[v] for v in vs) in expected
