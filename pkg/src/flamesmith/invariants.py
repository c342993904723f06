"""Operation specs, the recursive split of the postcondition, and the
enumeration of candidate loop invariants.

Candidates come from a closed grammar of subexpression selections over the
split identity (prefix sum, suffix sum with anchored or deferred powers,
each with or without a running power tracker, plus the degenerate empty and
tracker-only selections).  A closed grammar keeps the output reproducible;
it makes no claim of enumerating every invariant that exists.

Every candidate passes three feasibility gates: well-formedness (array
indices provably in bounds, with a recorded one-step repair of a sum's index
range when it overshoots the array), non-vacuity (the selection must
constrain the output through part of the postcondition), and completability
(some guard makes the exit imply the postcondition).
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Tuple

from .errors import SemanticError, UnsplittableForm
from .expr import (
    Add,
    ArrayElem,
    Expr,
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
    ac_equal,
    evaluate,
    free_vars,
    subterms,
)
from .normalize import declared_sizes, normalize
from .predicate import (
    Eq,
    Le,
    LinearSystem,
    Lt,
    Predicate,
    TRUE,
    entail,
    negate_guard,
    normalize_pred,
)
from .sampling import Context

INDEXED = "indexed"
FLAME = "flame"
FIRST_TO_LAST = "first_to_last"
LAST_TO_FIRST = "last_to_first"


@dataclass(frozen=True)
class VarDecl:
    name: str
    kind: str  # "scalar" | "vector"
    role: str  # "in" | "out" | "index" | "aux"
    size: Optional[str] = None


@dataclass(frozen=True)
class OperationSpec:
    name: str
    decls: Tuple[VarDecl, ...]
    pre: Predicate
    post: Predicate

    def validate(self) -> None:
        names = [d.name for d in self.decls]
        if len(names) != len(set(names)):
            raise SemanticError("duplicate variable declaration")
        outs = [d for d in self.decls if d.role == "out"]
        if len(outs) != 1 or outs[0].kind != "scalar":
            raise SemanticError("exactly one scalar output variable is required")
        vecs = [d for d in self.decls if d.kind == "vector"]
        if len(vecs) != 1:
            raise SemanticError("exactly one traversed vector is required")
        if vecs[0].size is None:
            raise SemanticError("the vector needs a declared size symbol")
        declared = set(names) | {vecs[0].size}
        from .predicate import pred_free_names

        for label, p in (("pre", self.pre), ("post", self.post)):
            loose = pred_free_names(p) - declared
            if loose:
                raise SemanticError(
                    f"{label}condition references undeclared {sorted(loose)}"
                )

    # -- accessors

    def output(self) -> str:
        return next(d.name for d in self.decls if d.role == "out")

    def vector(self) -> VarDecl:
        return next(d for d in self.decls if d.kind == "vector")

    def size(self) -> str:
        size = self.vector().size
        assert size is not None
        return size

    def index(self) -> Optional[str]:
        for d in self.decls:
            if d.role == "index":
                return d.name
        return None

    def scalar_inputs(self) -> Tuple[str, ...]:
        return tuple(d.name for d in self.decls if d.role == "in" and d.kind == "scalar")


def to_context(spec: OperationSpec, mode: str, auxes: Tuple[str, ...] = ()) -> Context:
    return Context(
        vector=spec.vector().name,
        size_name=spec.size(),
        point_inputs=spec.scalar_inputs(),
        outputs=(spec.output(),),
        index=spec.index() if mode == INDEXED else None,
        auxes=auxes,
        partitioned=(mode == FLAME),
    )


# ---------------------------------------------------------------------------
# Recognizing and splitting the postcondition


@dataclass(frozen=True)
class PostShape:
    out: str
    vector: str
    size: str
    ivar: str
    point: Expr


def recognize_post(spec: OperationSpec) -> PostShape:
    atoms = [a for a in spec.post.atoms]
    if len(atoms) != 1 or not isinstance(atoms[0], Eq):
        raise UnsplittableForm("postcondition must be a single equation")
    eq = atoms[0]
    if not isinstance(eq.lhs, Var) or eq.lhs.name != spec.output():
        raise UnsplittableForm("postcondition must define the output variable")
    rhs = eq.rhs
    if not isinstance(rhs, Sum):
        raise UnsplittableForm("postcondition must be a bounded sum")
    vec = spec.vector().name
    size = spec.size()
    if not (isinstance(rhs.lo, IntConst) and rhs.lo.value == 0):
        raise UnsplittableForm("the sum must start at the first element")
    if not (isinstance(rhs.hi, Var) and rhs.hi.name == size):
        raise UnsplittableForm("the sum must cover the whole vector")
    i = rhs.var
    # Recognized reduction body: a[i] * point^i for some input point.
    for d in spec.decls:
        if d.role == "in" and d.kind == "scalar":
            template = Mul(ArrayElem(vec, Var(i)), Pow(Var(d.name), Var(i)))
            if ac_equal(rhs.body, template):
                return PostShape(spec.output(), vec, size, i, Var(d.name))
    raise UnsplittableForm(
        "sum body is not the recognized a[i] * point^i reduction shape"
    )


@dataclass(frozen=True)
class SplitIdentity:
    mode: str
    equation: Eq
    range_pred: Predicate
    shape: PostShape


def size_bindings(spec: OperationSpec) -> dict:
    return {spec.vector().name: spec.size()}


def split_postcondition(spec: OperationSpec, mode: str = INDEXED) -> SplitIdentity:
    """Build the recursive split of the postcondition and verify it
    numerically over every split point of a batch of random small vectors."""
    shape = recognize_post(spec)
    i, vec, x = shape.ivar, shape.vector, shape.point
    a_i = ArrayElem(vec, Var(i))
    if mode == INDEXED:
        k = spec.index()
        if k is None:
            raise UnsplittableForm("indexed mode needs a declared index variable")
        kv = Var(k)
        left = Sum(i, IntConst(0), kv, Mul(a_i, Pow(x, Var(i))))
        right = Sum(i, kv, Var(shape.size), Mul(a_i, Pow(x, Sub(Var(i), kv))))
        identity = Eq(Var(shape.out), Add(left, Mul(right, Pow(x, kv))))
        rng_pred = Predicate((Le(IntConst(0), kv), Le(kv, Var(shape.size))))
    elif mode == FLAME:
        top = Poly(VecRef(vec, "T"), x)
        bottom = Mul(Poly(VecRef(vec, "B"), x), Pow(x, Len(VecRef(vec, "T"))))
        identity = Eq(Var(shape.out), Add(top, bottom))
        rng_pred = TRUE
    else:
        raise ValueError(f"unknown mode {mode!r}")

    _verify_split(identity, shape, mode, spec.index() if mode == INDEXED else None)
    return SplitIdentity(mode, identity, rng_pred, shape)


def _verify_split(identity: Eq, shape: PostShape, mode: str, index_name) -> None:
    rng = random.Random(0xF1A3)
    point_name = identity_point_name(shape)
    for _ in range(40):
        n = rng.randint(0, 8)
        vec = tuple(Fraction(rng.randint(-5, 5)) for _ in range(n))
        x = Fraction(rng.randint(-3, 3))
        whole = sum(
            (c * x**j for j, c in enumerate(vec)), Fraction(0)
        )
        for split in range(n + 1):
            state = State(
                scalars={shape.size: Fraction(n), point_name: x},
                vectors={shape.vector: vec},
            )
            if mode == INDEXED:
                state.scalars[index_name] = Fraction(split)
            else:
                state.splits[shape.vector] = split
            got = evaluate(identity.rhs, state)
            if got != whole:
                raise UnsplittableForm(
                    f"split identity failed numerically at n={n}, split={split}"
                )


def identity_point_name(shape: PostShape) -> str:
    assert isinstance(shape.point, Var)
    return shape.point.name


# ---------------------------------------------------------------------------
# Candidate enumeration


@dataclass(frozen=True)
class InvariantCandidate:
    cid: int
    mode: str
    label: str
    predicate: Predicate
    auxiliaries: Tuple[Tuple[str, Expr], ...]
    direction: str
    valid: bool
    reason: str = ""
    repairs: Tuple[str, ...] = ()

    def aux_names(self) -> Tuple[str, ...]:
        return tuple(name for name, _ in self.auxiliaries)


def _bounds_ok(eq: Eq, range_pred: Predicate, size: str) -> bool:
    """Every array access inside every sum provably stays inside [0, size)."""
    for t in subterms(eq.rhs):
        if not isinstance(t, Sum):
            continue
        for sub in subterms(t.body):
            if isinstance(sub, ArrayElem) and t.var in free_vars(sub.index):
                sys = LinearSystem()
                for a in range_pred.atoms:
                    sys.add_atom(a)
                sys.add_le(t.lo, Var(t.var))
                sys.add_lt(Var(t.var), t.hi)
                if not sys.entails_le(IntConst(0), sub.index):
                    return False
                if not sys.entails_lt(sub.index, Var(size)):
                    return False
    return True


def _repair_bounds(eq: Eq, range_pred: Predicate, size: str):
    """Tighten a sum's index range by one step when its top element would
    overshoot the array; returns (eq, note) or (eq, None) when sound as is."""
    if _bounds_ok(eq, range_pred, size):
        return eq, None

    def tighten(e: Expr):
        if isinstance(e, Sum):
            return Sum(e.var, e.lo, normalize(Sub(e.hi, IntConst(1))), e.body)
        return e

    from .expr import replace_subterm, ac_key

    repaired_rhs = eq.rhs
    for t in subterms(eq.rhs):
        if isinstance(t, Sum):
            candidate = tighten(t)
            repaired_rhs = replace_subterm(repaired_rhs, ac_key(t), candidate, ac_key)
    repaired = Eq(eq.lhs, repaired_rhs)
    if _bounds_ok(repaired, range_pred, size):
        note = (
            "index range repaired: the selected sum would read one element past "
            "the array at the top of its range; its upper bound was tightened by one"
        )
        return repaired, note
    return eq, False


def guard_grammar(spec: OperationSpec, mode: str):
    """Candidate loop guards.  Every guard compares the progress variable
    (the index, or a segment length) so it can eventually flip."""
    if mode == INDEXED:
        k = Var(spec.index())
        n = Var(spec.size())
        return [
            Predicate((Lt(IntConst(0), k),)),
            Predicate((Lt(k, n),)),
        ]
    v = spec.vector().name
    whole = Len(VecRef(v))
    return [
        Predicate((Lt(Len(VecRef(v, "B")), whole),)),
        Predicate((Lt(Len(VecRef(v, "T")), whole),)),
    ]


def _completable(candidate_pred: Predicate, spec: OperationSpec, mode: str) -> bool:
    post = spec.post if mode == INDEXED else flame_post(spec)
    for g in guard_grammar(spec, mode):
        if entail(candidate_pred.conjoin(negate_guard(g)), post):
            return True
    return False


def flame_post(spec: OperationSpec) -> Predicate:
    shape = recognize_post(spec)
    return Predicate(
        (Eq(Var(shape.out), Poly(VecRef(shape.vector), shape.point)),)
    )


_LABELS = {
    1: "prefix of processed terms",
    2: "pending suffix, powers anchored at the origin",
    3: "prefix of processed terms with a running power tracker",
    4: "anchored pending suffix with a running power tracker",
    5: "pending suffix with the power factor deferred",
    6: "deferred pending suffix with a running power tracker",
    7: "empty selection",
    8: "power tracker only",
}


def enumerate_invariants(spec: OperationSpec, mode: str = INDEXED):
    """All candidates from the selection grammar, each validated or rejected
    with a reason.  Candidate ids are stable across modes."""
    with declared_sizes(size_bindings(spec)):
        return _enumerate(spec, mode)


def _enumerate(spec: OperationSpec, mode: str):
    split = split_postcondition(spec, mode)
    shape = split.shape
    out = Var(shape.out)
    vec, x, i = shape.vector, shape.point, shape.ivar
    a_i = ArrayElem(vec, Var(i))
    aux_name = _fresh_aux(spec)

    if mode == INDEXED:
        k = Var(spec.index())
        n = Var(shape.size)
        range_atoms = (Le(IntConst(0), k), Le(k, n))
        # Selections read off the split; the prefix is first written the naive
        # inclusive way ("everything through element k") and then repaired.
        prefix_naive = Sum(i, IntConst(0), Add(k, IntConst(1)), Mul(a_i, Pow(x, Var(i))))
        suffix_anchored = Sum(i, k, n, Mul(a_i, Pow(x, Var(i))))
        suffix_deferred = Sum(i, k, n, Mul(a_i, Pow(x, Sub(Var(i), k))))
        tracker = Pow(x, k)
        selections = [
            (1, prefix_naive, False, FIRST_TO_LAST),
            (2, suffix_anchored, False, LAST_TO_FIRST),
            (3, prefix_naive, True, FIRST_TO_LAST),
            (4, suffix_anchored, True, LAST_TO_FIRST),
            (5, suffix_deferred, False, LAST_TO_FIRST),
            (6, suffix_deferred, True, LAST_TO_FIRST),
            (7, IntConst(0), False, FIRST_TO_LAST),
            (8, None, True, FIRST_TO_LAST),
        ]
    else:
        range_atoms = ()
        prefix = Poly(VecRef(vec, "T"), x)
        suffix_anchored = Mul(Poly(VecRef(vec, "B"), x), Pow(x, Len(VecRef(vec, "T"))))
        suffix_deferred = Poly(VecRef(vec, "B"), x)
        tracker = Pow(x, Len(VecRef(vec, "T")))
        selections = [
            (1, prefix, False, FIRST_TO_LAST),
            (2, suffix_anchored, False, LAST_TO_FIRST),
            (3, prefix, True, FIRST_TO_LAST),
            (4, suffix_anchored, True, LAST_TO_FIRST),
            (5, suffix_deferred, False, LAST_TO_FIRST),
            (6, suffix_deferred, True, LAST_TO_FIRST),
            (7, IntConst(0), False, FIRST_TO_LAST),
            (8, None, True, FIRST_TO_LAST),
        ]

    out_candidates = []
    for cid, selection, with_tracker, direction in selections:
        repairs = ()
        atoms = []
        auxes: Tuple[Tuple[str, Expr], ...] = ()
        if selection is not None:
            eq = Eq(out, selection)
            if mode == INDEXED:
                fixed, note = _repair_bounds(eq, Predicate(range_atoms), shape.size)
                if note is False:
                    out_candidates.append(
                        InvariantCandidate(
                            cid, mode, _LABELS[cid], normalize_pred(Predicate((eq,) + range_atoms)),
                            (), direction, False,
                            reason="well-formedness: an array index cannot be kept in bounds",
                        )
                    )
                    continue
                if note:
                    repairs = (note,)
                eq = fixed
            atoms.append(eq)
        if with_tracker:
            atoms.append(Eq(Var(aux_name), tracker))
            auxes = ((aux_name, tracker),)
        atoms.extend(range_atoms)
        predicate = normalize_pred(Predicate(tuple(atoms)))

        computes_output = any(
            isinstance(a, Eq)
            and isinstance(a.lhs, Var)
            and a.lhs.name == shape.out
            and any(isinstance(t, (Sum, Poly)) for t in subterms(a.rhs))
            for a in predicate.atoms
        )
        if not computes_output:
            out_candidates.append(
                InvariantCandidate(
                    cid, mode, _LABELS[cid], predicate, auxes, direction, False,
                    reason="non-vacuity: the selection computes nothing toward the postcondition",
                )
            )
            continue

        if not _completable(predicate, spec, mode):
            out_candidates.append(
                InvariantCandidate(
                    cid, mode, _LABELS[cid], predicate, auxes, direction, False,
                    reason="completability: no guard in the grammar closes the loop",
                )
            )
            continue

        out_candidates.append(
            InvariantCandidate(
                cid, mode, _LABELS[cid], predicate, auxes, direction, True,
                repairs=repairs,
            )
        )
    return out_candidates


def _fresh_aux(spec: OperationSpec) -> str:
    taken = {d.name for d in spec.decls} | {spec.size()}
    for d in spec.decls:
        if d.role == "aux":
            return d.name
    name = "z"
    while name in taken:
        name += "_"
    return name
