import random
from fractions import Fraction as F

import pytest

from flamesmith.errors import InvariantViolation
from flamesmith.expr import Add, ArrayElem, IntConst, Mul, Sub, Var
from flamesmith.interpreter import (
    make_input_state,
    nested_form_identity_check,
    oracle,
    run,
)
from flamesmith.wp import SimAssign

k, x, y = Var("k"), Var("x"), Var("y")


class TestOracle:
    def test_direct_summation(self):
        assert oracle([1, 2, 3], 2) == 17

    def test_empty_polynomial(self):
        assert oracle([], 5) == 0

    def test_degree_zero(self):
        assert oracle([7], 123) == 7

    def test_exact_rationals(self):
        assert oracle([F(1, 2), F(1, 3)], F(1, 5)) == F(1, 2) + F(1, 15)


class TestNestedForm:
    def test_example(self):
        assert nested_form_identity_check([1, 2, 3], 2)

    def test_empty(self):
        assert nested_form_identity_check([], 7)

    def test_property_run(self):
        rng = random.Random(42)
        for _ in range(1000):
            n = rng.randint(0, 8)
            coeffs = [rng.randint(-5, 5) for _ in range(n)]
            xv = rng.randint(-3, 3)
            assert nested_form_identity_check(coeffs, xv)


class TestRun:
    def test_horner_trace(self, horner_indexed):
        result = run(horner_indexed, make_input_state(horner_indexed, [1, 2, 3], 2))
        assert result.result == 17
        assert result.trace_of("y") == [0, 3, 8, 17]

    def test_empty_vector_zero_iterations(self, horner_indexed, horner_flame, polyeval):
        from flamesmith.invariants import enumerate_invariants
        from flamesmith.worksheet import derive

        for mode in ("indexed", "flame"):
            for c in enumerate_invariants(polyeval, mode):
                if not c.valid:
                    continue
                w = derive(polyeval, c.cid, mode, trials=60, seed=42)
                result = run(w, make_input_state(w, [], 5), check_invariants=True)
                assert result.result == 0
                assert result.iterations == []

    def test_trace_length_is_vector_length(self, horner_flame):
        for n in range(6):
            coeffs = list(range(1, n + 1))
            result = run(horner_flame, make_input_state(horner_flame, coeffs, 2))
            assert len(result.iterations) == n

    def test_flame_run_matches_indexed(self, horner_indexed, horner_flame):
        rng = random.Random(17)
        for _ in range(200):
            n = rng.randint(0, 8)
            coeffs = [rng.randint(-5, 5) for _ in range(n)]
            xv = rng.randint(-3, 3)
            ri = run(horner_indexed, make_input_state(horner_indexed, coeffs, xv))
            rf = run(horner_flame, make_input_state(horner_flame, coeffs, xv))
            assert ri.result == rf.result == oracle(coeffs, xv)

    def test_corrupted_update_raises_invariant_violation(self, horner_indexed):
        bad = horner_indexed.copy()
        corrupted = Add(Mul(ArrayElem("a", Sub(k, IntConst(1))), x), Mul(y, x))
        bad.update = SimAssign(("y",), (corrupted,))
        with pytest.raises(InvariantViolation) as err:
            run(bad, make_input_state(bad, [1, 2, 3], 2), check_invariants=True)
        assert err.value.iteration == 1

    def test_nontermination_cap(self, horner_indexed):
        from flamesmith.errors import NonTermination

        runaway = horner_indexed.copy()
        # an index update that makes no progress: the guard 0 < k never flips
        runaway.index_update = SimAssign(("k",), (k,))
        with pytest.raises(NonTermination):
            run(runaway, make_input_state(runaway, [1, 2, 3], 2))

    def test_check_invariants_clean_on_complete_worksheets(self, horner_indexed):
        rng = random.Random(23)
        for _ in range(300):
            n = rng.randint(0, 8)
            coeffs = [rng.randint(-5, 5) for _ in range(n)]
            xv = rng.randint(-3, 3)
            result = run(
                horner_indexed,
                make_input_state(horner_indexed, coeffs, xv),
                check_invariants=True,
            )
            assert result.result == oracle(coeffs, xv)
