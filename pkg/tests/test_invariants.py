import random
from fractions import Fraction as F

import pytest

from flamesmith.errors import UnsplittableForm
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
from flamesmith.invariants import (
    FIRST_TO_LAST,
    LAST_TO_FIRST,
    OperationSpec,
    VarDecl,
    enumerate_invariants,
    split_postcondition,
)
from flamesmith.predicate import Eq, Le, Predicate, normalize_pred

i, k, n, x, y, z = (Var(s) for s in "iknxyz")
a_i = ArrayElem("a", i)


def reference_rows():
    """The five classical invariant rows for polynomial evaluation, with
    rows 1 and 3 in the repaired exclusive-upper-bound form."""
    prefix = Sum("i", IntConst(0), k, Mul(a_i, Pow(x, i)))
    suffix_anchored = Sum("i", k, n, Mul(a_i, Pow(x, i)))
    suffix_deferred = Sum("i", k, n, Mul(a_i, Pow(x, Sub(i, k))))
    rng = (Le(IntConst(0), k), Le(k, n))
    return {
        1: Predicate((Eq(y, prefix),) + rng),
        2: Predicate((Eq(y, suffix_anchored),) + rng),
        3: Predicate((Eq(y, prefix), Eq(z, Pow(x, k))) + rng),
        4: Predicate((Eq(y, suffix_anchored), Eq(z, Pow(x, k))) + rng),
        5: Predicate((Eq(y, suffix_deferred),) + rng),
    }


class TestSplit:
    def test_indexed_split_matches_published_identity(self, polyeval):
        split = split_postcondition(polyeval, "indexed")
        left = Sum("i", IntConst(0), k, Mul(a_i, Pow(x, i)))
        right = Sum("i", k, n, Mul(a_i, Pow(x, Sub(i, k))))
        expected = Eq(y, Add(left, Mul(right, Pow(x, k))))
        assert split.equation == expected
        assert split.range_pred == Predicate((Le(IntConst(0), k), Le(k, n)))

    def test_flame_split_is_partitioned_identity(self, polyeval):
        split = split_postcondition(polyeval, "flame")
        expected = Eq(y, Add(
            Poly(VecRef("a", "T"), x),
            Mul(Poly(VecRef("a", "B"), x), Pow(x, Len(VecRef("a", "T")))),
        ))
        assert split.equation == expected

    def test_split_soundness_every_split_point(self, polyeval):
        split = split_postcondition(polyeval, "indexed")
        rng = random.Random(5)
        for _ in range(30):
            nv = rng.randint(0, 8)
            coeffs = tuple(F(rng.randint(-5, 5)) for _ in range(nv))
            xv = F(rng.randint(-3, 3))
            whole = sum((c * xv**j for j, c in enumerate(coeffs)), F(0))
            for mid in range(nv + 1):
                s = State(
                    scalars={"n": F(nv), "x": xv, "k": F(mid)},
                    vectors={"a": coeffs},
                )
                assert evaluate(split.equation.rhs, s) == whole

    def test_unsplittable_forms(self):
        decls = (
            VarDecl("y", "scalar", "out"),
            VarDecl("a", "vector", "in", size="n"),
            VarDecl("x", "scalar", "in"),
            VarDecl("k", "scalar", "index"),
        )
        bad = OperationSpec(
            "odd", decls,
            Predicate(()),
            Predicate((Eq(y, Mul(x, x)),)),
        )
        with pytest.raises(UnsplittableForm):
            split_postcondition(bad, "indexed")


class TestEnumeration:
    def test_five_reference_rows_present(self, polyeval):
        rows = reference_rows()
        candidates = {c.cid: c for c in enumerate_invariants(polyeval, "indexed")}
        for cid, expected in rows.items():
            assert candidates[cid].valid, cid
            assert normalize_pred(candidates[cid].predicate) == normalize_pred(expected), cid

    def test_rows_1_and_3_carry_repair_notes(self, polyeval):
        candidates = {c.cid: c for c in enumerate_invariants(polyeval, "indexed")}
        assert candidates[1].repairs and candidates[3].repairs
        assert not candidates[2].repairs and not candidates[5].repairs

    def test_rejections_report_non_vacuity(self, polyeval):
        candidates = enumerate_invariants(polyeval, "indexed")
        rejected = [c for c in candidates if not c.valid]
        assert len(rejected) >= 1
        assert any("non-vacuity" in c.reason for c in rejected)

    def test_traversal_directions(self, polyeval):
        directions = {c.cid: c.direction for c in enumerate_invariants(polyeval, "indexed")}
        assert directions[1] == FIRST_TO_LAST
        assert directions[3] == FIRST_TO_LAST
        assert directions[2] == LAST_TO_FIRST
        assert directions[4] == LAST_TO_FIRST
        assert directions[5] == LAST_TO_FIRST

    def test_flame_forms(self, polyeval):
        candidates = {c.cid: c for c in enumerate_invariants(polyeval, "flame")}
        assert candidates[5].predicate == Predicate((Eq(y, Poly(VecRef("a", "B"), x)),))
        assert candidates[5].direction == LAST_TO_FIRST
        assert candidates[1].predicate == Predicate((Eq(y, Poly(VecRef("a", "T"), x)),))
        expected2 = Predicate((
            Eq(y, Mul(Poly(VecRef("a", "B"), x), Pow(x, Len(VecRef("a", "T"))))),
        ))
        assert candidates[2].predicate == expected2

    def test_candidate_ids_stable_across_modes(self, polyeval):
        indexed = {c.cid: c.direction for c in enumerate_invariants(polyeval, "indexed")}
        flame = {c.cid: c.direction for c in enumerate_invariants(polyeval, "flame")}
        assert indexed == flame

    def test_valid_candidates_at_least_five(self, polyeval):
        for mode in ("indexed", "flame"):
            valid = [c for c in enumerate_invariants(polyeval, mode) if c.valid]
            assert len(valid) >= 5
