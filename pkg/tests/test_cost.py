import pytest

from flamesmith.cost import (
    CostReport,
    Recurrence,
    check_recurrence_symbolically,
    count_update_flops,
    instrument,
    prove_cost,
    recurrence_of,
    solve_recurrence,
)
from flamesmith.errors import CostInvariantFalsified, UnsupportedRecurrence
from flamesmith.expr import (
    Add,
    ArrayElem,
    IntConst,
    Len,
    Mul,
    Pow,
    Sub,
    Var,
    VecRef,
)
from flamesmith.predicate import Eq
from flamesmith.worksheet import derive
from flamesmith.wp import SimAssign

k, n, x, y = Var("k"), Var("n"), Var("x"), Var("y")


class TestFlopCounting:
    def test_horner_update_is_two_flops(self, horner_indexed):
        constant, _ = count_update_flops(horner_indexed.update)
        assert constant == 2

    def test_constant_power_expands(self):
        update = SimAssign(("y",), (Mul(ArrayElem("a", k), Pow(x, IntConst(3))),))
        constant, _ = count_update_flops(update)
        # x^3 is two multiplies, plus the outer multiply
        assert constant == 3

    def test_symbolic_power_blocks_extraction(self):
        update = SimAssign(
            ("y",),
            (Add(y, Mul(ArrayElem("a", Sub(k, IntConst(1))), Pow(x, Sub(k, IntConst(1))))),),
        )
        constant, expr = count_update_flops(update)
        assert constant is None
        assert expr is not None

    def test_empty_update_costs_nothing(self):
        constant, _ = count_update_flops(SimAssign(("y",), (y,)))
        assert constant == 0


class TestRecurrence:
    def test_horner_recurrence(self, horner_indexed):
        wi = instrument(horner_indexed)
        rec = recurrence_of(wi)
        assert rec == Recurrence(0, 2)
        closed = solve_recurrence(rec)
        assert closed == Mul(IntConst(2), Var("k"))
        assert check_recurrence_symbolically(closed, rec)

    def test_constant_recurrence(self):
        assert solve_recurrence(Recurrence(5, 0)) == IntConst(5)

    def test_three_per_step(self):
        closed = solve_recurrence(Recurrence(0, 3))
        assert closed == Mul(IntConst(3), Var("k"))
        assert check_recurrence_symbolically(closed, Recurrence(0, 3))

    def test_unsupported(self, polyeval):
        w = derive(polyeval, 1, "indexed", trials=60, seed=42)
        wi = instrument(w)
        assert wi.cost.increment is None
        with pytest.raises(UnsupportedRecurrence):
            solve_recurrence(recurrence_of(wi))


class TestInstrument:
    def test_adds_counter_and_invariant(self, horner_indexed):
        wi = instrument(horner_indexed)
        assert wi.cost.counter == "C"
        assert wi.cost.increment == 2
        assert wi.cost.invariant_atom == Eq(
            Var("C"), Mul(IntConst(2), Sub(n, k))
        )
        assert wi.cost.total == Mul(IntConst(2), n)

    def test_flame_cost_invariant_counts_processed_segment(self, horner_flame):
        wi = instrument(horner_flame)
        assert wi.cost.invariant_atom == Eq(
            Var("C"), Mul(IntConst(2), Len(VecRef("a", "B")))
        )
        assert wi.cost.total == Mul(IntConst(2), Len(VecRef("a")))


class TestProveCost:
    def test_horner_counts_match_exactly(self, horner_flame):
        report = prove_cost(instrument(horner_flame), trials=150, seed=42, max_n=64)
        assert report.runtime_ok
        assert report.runtime_counts == [(n, 2 * n) for n in range(65)]
        assert all(o.verdict.ok for o in report.obligations)

    def test_zero_size_costs_zero(self, horner_indexed):
        report = prove_cost(instrument(horner_indexed), trials=100, seed=42, max_n=0)
        assert report.runtime_counts == [(0, 0)]

    def test_corrupted_increment_falsified(self, horner_indexed):
        wi = instrument(horner_indexed)
        bad = wi.copy()
        from flamesmith.worksheet import CostInstrumentation

        bad.cost = CostInstrumentation(
            counter=wi.cost.counter,
            increment=3,
            increment_expr=IntConst(3),
            invariant_atom=wi.cost.invariant_atom,
            processed=wi.cost.processed,
            total=wi.cost.total,
        )
        with pytest.raises(CostInvariantFalsified):
            prove_cost(bad, trials=1000, seed=42, max_n=4)

    def test_division_candidate_costs_constant(self, polyeval):
        w = derive(polyeval, 4, "indexed", trials=80, seed=42)
        report = prove_cost(instrument(w), trials=80, seed=42, max_n=12)
        assert report.increment == 4
        assert report.runtime_counts == [(n, 4 * n) for n in range(13)]
