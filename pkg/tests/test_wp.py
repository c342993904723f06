import random
from fractions import Fraction as F

import pytest

from flamesmith.checking import hoare_test, implies
from flamesmith.errors import TargetAbsent, UnsupportedStatement, VacuousPrecondition
from flamesmith.expr import (
    Add,
    ArrayElem,
    IntConst,
    Len,
    Mul,
    Poly,
    Pow,
    State,
    Sub,
    Sum,
    Var,
    VecRef,
    evaluate,
)
from flamesmith.predicate import Eq, Le, Lt, Predicate, TRUE, predicate_holds
from flamesmith.sampling import Context, draw_base_state
from flamesmith.wp import (
    MergeBack,
    PartitionInit,
    Repartition,
    Seq,
    SimAssign,
    Skip,
    While,
    exec_stmt,
    forward_repartition,
    seq,
    wp,
    wp_symbolic_assign,
)

i, k, n, x, y, z = (Var(s) for s in "iknxyz")
a_i = ArrayElem("a", i)
INV5 = Predicate((
    Eq(y, Sum("i", k, n, Mul(a_i, Pow(x, Sub(i, k))))),
    Le(IntConst(0), k),
    Le(k, n),
))
CTX = Context(vector="a", size_name="n", point_inputs=("x",), outputs=("y",), index="k")


@pytest.fixture(autouse=True)
def _polyeval_sizes():
    from flamesmith.normalize import declared_sizes

    with declared_sizes({"a": "n"}):
        yield


class TestWp:
    def test_skip_is_identity(self):
        r = Predicate((Le(IntConst(0), k),))
        assert wp(Skip(), r) == r

    def test_index_decrement_gives_peeled_form(self):
        got = wp(SimAssign(("k",), (Sub(k, IntConst(1)),)), INV5)
        expected = Predicate((
            Eq(y, Add(
                ArrayElem("a", Sub(k, IntConst(1))),
                Mul(Sum("i", k, n, Mul(a_i, Pow(x, Sub(i, k)))), x),
            )),
            Le(IntConst(1), k),
            Le(k, Add(n, IntConst(1))),
        ))
        assert got == expected

    def test_simultaneous_init_form(self):
        got = wp(SimAssign(("y", "k"), (Var("E0"), Var("E1"))), INV5)
        expected = Predicate((
            Eq(Var("E0"), Sum("i", Var("E1"), n, Mul(a_i, Pow(x, Sub(i, Var("E1")))))),
            Le(IntConst(0), Var("E1")),
            Le(Var("E1"), n),
        ))
        assert got == expected

    def test_seq_composes(self):
        s1 = SimAssign(("y",), (Add(y, IntConst(1)),))
        s2 = SimAssign(("k",), (Sub(k, IntConst(1)),))
        assert wp(Seq(s1, s2), INV5) == wp(s1, wp(s2, INV5))

    def test_while_unsupported(self):
        with pytest.raises(UnsupportedStatement):
            wp(While(Predicate((Lt(IntConst(0), k),)), Skip()), INV5)

    def test_merge_back_expands_stacked_polynomial(self):
        inv = Predicate((Eq(y, Poly(VecRef("a", "B"), x)),))
        got = wp(MergeBack("a", into="B"), inv)
        expected = Predicate((
            Eq(y, Add(VecRef("a", "1"), Mul(Poly(VecRef("a", "2"), x), x))),
        ))
        assert got == expected

    def test_partition_init_collapses_empty_side(self):
        inv = Predicate((Eq(y, Poly(VecRef("a", "B"), x)),))
        got = wp(PartitionInit("a", empty_side="B"), inv)
        assert got == Predicate((Eq(y, IntConst(0)),))

    def test_forward_repartition_renames(self):
        inv = Predicate((Eq(y, Poly(VecRef("a", "B"), x)),))
        got = forward_repartition(inv, Repartition("a", expose_from="T"))
        assert got == Predicate((Eq(y, Poly(VecRef("a", "2"), x)),))

    def test_backward_repartition_partial(self):
        fine = Predicate((Eq(y, Poly(VecRef("a", "2"), x)),))
        got = wp(Repartition("a", expose_from="T"), fine)
        assert got == Predicate((Eq(y, Poly(VecRef("a", "B"), x)),))
        stuck = Predicate((Eq(y, VecRef("a", "1")),))
        with pytest.raises(UnsupportedStatement):
            wp(Repartition("a", expose_from="T"), stuck)


class TestWpSymbolicAssign:
    def test_single_target(self):
        got = wp_symbolic_assign(("y",), Predicate((Eq(y, IntConst(0)),)), ("E",))
        assert got == Predicate((Eq(Var("E"), IntConst(0)),))

    def test_other_conjuncts_untouched(self):
        p = Predicate((Eq(z, Pow(x, k)), Eq(y, IntConst(0))))
        got = wp_symbolic_assign(("z",), p, ("E",))
        assert got == Predicate((Eq(Var("E"), Pow(x, k)), Eq(y, IntConst(0))))

    def test_target_absent(self):
        with pytest.raises(TargetAbsent):
            wp_symbolic_assign(("y",), Predicate((Eq(z, IntConst(0)),)), ("E",))


class TestExec:
    def test_simultaneous_assignment(self):
        s = State(scalars={"y": F(1), "k": F(5)})
        exec_stmt(SimAssign(("y", "k"), (k, y)), s)
        assert s.scalars == {"y": F(5), "k": F(1)}

    def test_partition_cycle(self):
        s = State(vectors={"a": (F(1), F(2), F(3))})
        exec_stmt(PartitionInit("a", empty_side="B"), s)
        assert s.splits["a"] == 3
        exec_stmt(Repartition("a", expose_from="T"), s)
        assert s.exposed["a"] == (2, 3)
        assert evaluate(VecRef("a", "1"), s) == 3
        exec_stmt(MergeBack("a", into="B"), s)
        assert s.splits["a"] == 2
        assert "a" not in s.exposed

    def test_counter(self):
        from flamesmith.wp import CounterIncr

        s = State()
        exec_stmt(CounterIncr("C", 2), s)
        exec_stmt(CounterIncr("C", 2), s)
        assert s.scalars["C"] == 4


class TestWpAgainstExecution:
    def test_wp_execution_agreement(self):
        # for loop-free s and random states: wp(s, R) holds before exactly
        # when R holds after executing s
        rng = random.Random(11)
        stmt = Seq(
            SimAssign(("y",), (Add(ArrayElem("a", Sub(k, IntConst(1))), Mul(y, x)),)),
            SimAssign(("k",), (Sub(k, IntConst(1)),)),
        )
        checked = 0
        for _ in range(400):
            s = draw_base_state(CTX, rng)
            if s.scalars["k"] == 0:
                continue
            pre = wp(stmt, INV5)
            try:
                before = predicate_holds(pre, s)
            except Exception:
                continue
            after_state = s.copy()
            exec_stmt(stmt, after_state)
            assert before == predicate_holds(INV5, after_state)
            checked += 1
        assert checked > 100

    def test_hoare_test_init_triple(self):
        init = SimAssign(("y", "k"), (IntConst(0), n))
        v = hoare_test(Predicate((Le(IntConst(0), n),)), init, INV5, CTX, trials=300, seed=42)
        assert v.ok

    def test_hoare_test_skip(self):
        v = hoare_test(TRUE, Skip(), TRUE, CTX, trials=20, seed=42)
        assert v.kind == "tested"

    def test_hoare_test_update_preserves_invariant(self):
        body = Seq(
            SimAssign(("y",), (Add(ArrayElem("a", Sub(k, IntConst(1))), Mul(y, x)),)),
            SimAssign(("k",), (Sub(k, IntConst(1)),)),
        )
        pre = Predicate(INV5.atoms + (Lt(IntConst(0), k),))
        v = hoare_test(pre, body, INV5, CTX, trials=1000, seed=42)
        assert v.kind == "tested"
        assert v.trials == 1000

    def test_hoare_test_vacuous(self):
        impossible = Predicate((Lt(n, IntConst(0)),))
        with pytest.raises(VacuousPrecondition):
            hoare_test(impossible, Skip(), TRUE, CTX, trials=5, seed=42)

    def test_wp_monotone_never_falsified(self):
        stmt = SimAssign(("k",), (Sub(k, IntConst(1)),))
        r1 = Predicate((Le(IntConst(2), k), Le(k, n)))
        r2 = Predicate((Le(IntConst(0), k), Le(k, n)))
        v = implies(wp(stmt, r1), wp(stmt, r2), CTX, trials=1000, seed=42)
        assert v.kind != "falsified"
