"""The eight-step derivation worksheet and its verification.

`derive` fills the worksheet slots in step order: pre/postcondition
(1), invariant (2), guard (3), initialization (4), traversal (5), the state
after the indexing step (6), the pre-update obligation with its expression
hole (7), and the update that solves the hole (8).  Indexed worksheets reason
backward (weakest preconditions) below the update; partitioned ones reason
forward through the repartition at the top and backward through the merge at
the bottom.

Update synthesis replaces, inside the step-7 obligation, every occurrence of
the invariant's defining expressions by the program variables that hold
them, then insists the result fit a small documented template grammar:

    v := elem + v * point
    v := v + elem * factor
    v := v * point
    v := v / point          (division: the worksheet then requires point != 0)

plus simultaneous pairs of those.  Extending that grammar is the designated
extension point for new operation shapes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from .checking import (
    DEFAULT_SEED,
    DEFAULT_TRIALS,
    Verdict,
    descent_test,
    hoare_test,
    implies,
)
from .errors import (
    DerivationError,
    IncompleteWorksheet,
    NoGuardFound,
    NoInitFound,
    NoTemplateMatch,
    UnsupportedStatement,
)
from .expr import (
    Add,
    ArrayElem,
    Div,
    Expr,
    IntConst,
    Len,
    Mul,
    Poly,
    Pow,
    Sub,
    Sum,
    Var,
    VecRef,
    ac_equal,
    ac_key,
    children,
    contains_sum_or_poly,
    evaluate,
    free_vars,
    replace_subterm,
    subterms,
)
from .invariants import (
    FLAME,
    INDEXED,
    LAST_TO_FIRST,
    InvariantCandidate,
    OperationSpec,
    enumerate_invariants,
    flame_post,
    guard_grammar,
    recognize_post,
    size_bindings,
    to_context,
)
from .normalize import const_difference, declared_sizes, expand, normalize
from .predicate import (
    Atom,
    Eq,
    Lt,
    Ne,
    Predicate,
    TRUE,
    entail,
    negate_guard,
)
from .sampling import Context
from .wp import (
    MergeBack,
    PartitionInit,
    Repartition,
    Seq,
    SimAssign,
    Skip,
    Stmt,
    forward_repartition,
    seq,
    wp,
    wp_symbolic_assign,
)

DERIVED = "derived"
GIVEN = "given"


@dataclass(frozen=True)
class CostInstrumentation:
    counter: str
    increment: Optional[int]      # None when the flop count is input-dependent
    increment_expr: Expr          # the count, possibly symbolic
    invariant_atom: Optional[Atom]
    processed: Optional[Expr]     # elements already folded in
    total: Optional[Expr]         # closed-form cost of the whole loop


@dataclass(frozen=True)
class Obligation:
    name: str
    description: str
    verdict: Verdict


@dataclass
class Worksheet:
    mode: str
    spec: OperationSpec
    candidate: InvariantCandidate
    pre: Predicate
    post: Predicate
    guard: Optional[Predicate] = None
    init: Optional[Stmt] = None
    init_wp: Optional[Predicate] = None
    update: Optional[SimAssign] = None
    index_update: Optional[SimAssign] = None
    repartition: Optional[Repartition] = None
    merge: Optional[MergeBack] = None
    step6: Optional[Predicate] = None
    step7: Optional[Predicate] = None
    requires: Predicate = TRUE
    notes: Tuple[str, ...] = ()
    provenance: dict = field(default_factory=dict)
    obligations: List[Obligation] = field(default_factory=list)
    cost: Optional[CostInstrumentation] = None

    # -- assembled views

    def invariant(self) -> Predicate:
        base = self.candidate.predicate
        if self.cost is not None and self.cost.invariant_atom is not None:
            return Predicate(base.atoms + (self.cost.invariant_atom,))
        return base

    def filled(self) -> bool:
        core = (self.guard, self.init, self.update, self.step6, self.step7)
        if any(slot is None for slot in core):
            return False
        if self.mode == INDEXED:
            return self.index_update is not None
        return self.repartition is not None and self.merge is not None

    def complete(self) -> bool:
        return (
            self.filled()
            and bool(self.obligations)
            and all(o.verdict.ok for o in self.obligations)
        )

    def counted(self) -> bool:
        return self.cost is not None and self.cost.increment is not None

    def full_init(self) -> Stmt:
        base = self.init if self.init is not None else Skip()
        if self.counted():
            return seq(
                base, SimAssign((self.cost.counter,), (IntConst(0),))
            )
        return base

    def body(self) -> Stmt:
        from .wp import CounterIncr

        pieces = []
        if self.mode == FLAME and self.repartition is not None:
            pieces.append(self.repartition)
        if self.update is not None:
            pieces.append(self.update)
        if self.counted():
            pieces.append(CounterIncr(self.cost.counter, self.cost.increment))
        if self.mode == INDEXED and self.index_update is not None:
            pieces.append(self.index_update)
        if self.mode == FLAME and self.merge is not None:
            pieces.append(self.merge)
        return seq(*pieces)

    def exit_assertion(self) -> Predicate:
        assert self.guard is not None
        return self.invariant().conjoin(negate_guard(self.guard))

    def context(self) -> Context:
        auxes = list(self.candidate.aux_names())
        if self.cost is not None:
            auxes.append(self.cost.counter)
        return to_context(self.spec, self.mode, tuple(auxes))

    def output_name(self) -> str:
        return self.spec.output()

    def copy(self) -> "Worksheet":
        out = Worksheet(
            mode=self.mode, spec=self.spec, candidate=self.candidate,
            pre=self.pre, post=self.post, guard=self.guard, init=self.init,
            init_wp=self.init_wp, update=self.update,
            index_update=self.index_update, repartition=self.repartition,
            merge=self.merge, step6=self.step6, step7=self.step7,
            requires=self.requires, notes=self.notes,
            provenance=dict(self.provenance), cost=self.cost,
        )
        out.obligations = list(self.obligations)
        return out


# ---------------------------------------------------------------------------
# Step 3: the loop guard


def derive_guard(
    candidate: InvariantCandidate, post: Predicate, spec: OperationSpec, mode: str
) -> Predicate:
    """Weakest guard in the grammar whose negation, with the invariant,
    provably yields the postcondition."""
    proved = []
    for g in guard_grammar(spec, mode):
        if entail(candidate.predicate.conjoin(negate_guard(g)), post):
            proved.append(g)
    if not proved:
        raise NoGuardFound(
            f"no guard in the grammar completes invariant {candidate.cid}"
        )
    best = proved[0]
    for g in proved[1:]:
        if entail(best, g) and not entail(g, best):
            best = g
    return best


# ---------------------------------------------------------------------------
# Step 4: initialization


def _hole_names(spec: OperationSpec, candidate: InvariantCandidate):
    out_hole = "E0"
    index_hole = "E1"
    aux_holes = tuple(f"E{j + 2}" for j in range(len(candidate.auxiliaries)))
    return out_hole, index_hole, aux_holes


def _executable_init(e: Expr, allowed: set) -> bool:
    return not contains_sum_or_poly(e) and free_vars(e) <= allowed


def derive_init(spec: OperationSpec, candidate: InvariantCandidate, mode: str):
    """Synthesize the initialization: assignment holes are solved so the
    worksheet precondition provably establishes the invariant; in partitioned
    mode the cursor starts with the already-processed side empty.

    Returns (stmt, hole-form wp for the 4a slot).
    """
    out = spec.output()
    out_hole, index_hole, aux_holes = _hole_names(spec, candidate)
    aux_names = candidate.aux_names()
    inv = candidate.predicate
    allowed = set(spec.scalar_inputs()) | {spec.size()}

    if mode == INDEXED:
        k = spec.index()
        targets = (out,) + aux_names + (k,)
        holes = (out_hole,) + aux_holes + (index_hole,)
        display = wp(SimAssign(targets, tuple(Var(h) for h in holes)), inv)
        pre = spec.pre
        n = Var(spec.size())
        try_order = (
            [n, IntConst(0)] if candidate.direction == LAST_TO_FIRST else [IntConst(0), n]
        )
        for index_value in try_order:
            solved = _solve_holes(
                display, dict([(index_hole, index_value)]),
                (out_hole,) + aux_holes, allowed,
            )
            if solved is None:
                continue
            exprs = tuple(
                solved[h] if h != index_hole else index_value for h in holes
            )
            init = SimAssign(targets, exprs)
            if entail(pre, wp(init, inv)):
                return init, display
        raise NoInitFound(
            f"no initialization establishes invariant {candidate.cid}"
        )

    # Partitioned mode: cursor placed so the processed side is empty.
    vec = spec.vector().name
    empty_side = "B" if candidate.direction == LAST_TO_FIRST else "T"
    part = PartitionInit(vec, empty_side)
    targets = (out,) + aux_names
    holes = (out_hole,) + aux_holes
    assign = SimAssign(targets, tuple(Var(h) for h in holes))
    display = wp(Seq(assign, part), inv)
    solved = _solve_holes(display, {}, holes, allowed)
    if solved is None:
        raise NoInitFound(
            f"no initialization establishes invariant {candidate.cid}"
        )
    init = Seq(SimAssign(targets, tuple(solved[h] for h in holes)), part)
    if not entail(TRUE, wp(init, inv)):
        raise NoInitFound(
            f"initialization for invariant {candidate.cid} is not provable"
        )
    return init, display


def _solve_holes(display: Predicate, forced: dict, holes, allowed: set):
    """Bind hole variables from `var = expr` atoms whose right sides are
    executable over the inputs; `forced` pins holes tried by enumeration."""
    bindings = dict(forced)
    p = display
    if forced:
        p = wp(SimAssign(tuple(forced), tuple(forced.values())), p)
    remaining = [h for h in holes if h not in bindings]
    progress = True
    while remaining and progress:
        progress = False
        for a in p.atoms:
            if not isinstance(a, Eq) or not isinstance(a.lhs, Var):
                continue
            h = a.lhs.name
            if h not in remaining:
                continue
            rhs = normalize(a.rhs)
            if free_vars(rhs) & set(remaining) or free_vars(rhs) & set(bindings):
                continue
            if not _executable_init(rhs, allowed):
                continue
            bindings[h] = rhs
            remaining.remove(h)
            p = wp(SimAssign((h,), (rhs,)), p)
            progress = True
            break
    if remaining:
        return None
    return bindings


# ---------------------------------------------------------------------------
# Step 5: traversal


def derive_traversal(spec: OperationSpec, candidate: InvariantCandidate, mode: str):
    """Index update (indexed mode) or the expose/merge pair (partitioned).

    Returns (index_update, repartition, merge) with unused slots None.
    """
    if mode == INDEXED:
        k = spec.index()
        if candidate.direction == LAST_TO_FIRST:
            step = SimAssign((k,), (Sub(Var(k), IntConst(1)),))
        else:
            step = SimAssign((k,), (Add(Var(k), IntConst(1)),))
        return step, None, None
    vec = spec.vector().name
    if candidate.direction == LAST_TO_FIRST:
        return None, Repartition(vec, expose_from="T"), MergeBack(vec, into="B")
    return None, Repartition(vec, expose_from="B"), MergeBack(vec, into="T")


# ---------------------------------------------------------------------------
# Steps 6 and 7


def compute_step6(candidate, mode, index_update, repartition) -> Predicate:
    if mode == INDEXED:
        return wp(index_update, candidate.predicate)
    return forward_repartition(candidate.predicate, repartition)


def compute_step7(spec, candidate, mode, step6, merge) -> Predicate:
    targets = (spec.output(),) + candidate.aux_names()
    holes = _update_holes(spec, candidate)
    if mode == INDEXED:
        return wp_symbolic_assign(targets, step6, holes)
    src = wp(merge, candidate.predicate)
    return wp_symbolic_assign(targets, src, holes)


def _update_holes(spec: OperationSpec, candidate: InvariantCandidate):
    return ("E",) + tuple(f"E_{name}" for name in candidate.aux_names())


# ---------------------------------------------------------------------------
# Step 8: the update


def _is_elem(e: Expr) -> bool:
    return isinstance(e, ArrayElem) or (isinstance(e, VecRef) and e.part == "1")


def _mul_factors(e: Expr):
    if isinstance(e, Mul):
        return _mul_factors(e.lhs) + _mul_factors(e.rhs)
    return [e]


def _matches_template(e: Expr, target: str, point: Expr) -> Optional[str]:
    tv = Var(target)
    if isinstance(e, Add):
        sides = (e.lhs, e.rhs)
        for a, b in (sides, sides[::-1]):
            # elem + v * point
            if _is_elem(a) and isinstance(b, Mul):
                f = _mul_factors(b)
                if len(f) == 2 and any(ac_equal(x, tv) for x in f) and any(
                    ac_equal(x, point) for x in f
                ):
                    return "elem + v * point"
            # v + elem * factor
            if ac_equal(a, tv):
                f = _mul_factors(b)
                if any(_is_elem(x) for x in f) and not any(
                    target in free_vars(x) for x in f
                ):
                    return "v + elem * factor"
    if isinstance(e, Mul):
        f = _mul_factors(e)
        if len(f) == 2 and any(ac_equal(x, tv) for x in f) and any(
            ac_equal(x, point) for x in f
        ):
            return "v * point"
    if isinstance(e, Div) and ac_equal(e.lhs, tv) and ac_equal(e.rhs, point):
        return "v / point"
    return None


def _rewrite_with_tracker(e: Expr, aux: str, defining: Expr, point: Expr):
    """Replace powers of the point that sit a constant step away from the
    tracker's defining power: exact hit, one above (* point), one below
    (/ point).  Returns (expr, used_division)."""
    if not isinstance(defining, Pow):
        return e, False
    base, dexp = defining.base, defining.exp
    used_div = [False]

    def walk(node: Expr) -> Expr:
        if isinstance(node, Sum):
            return node
        if isinstance(node, Pow) and ac_equal(node.base, base):
            c = const_difference(node.exp, dexp)
            if c == 0:
                return Var(aux)
            if c == 1:
                return Mul(Var(aux), base)
            if c == -1:
                used_div[0] = True
                return Div(Var(aux), base)
        kids = children(node)
        if not kids:
            return node
        return _rebuild(node, [walk(c) for c in kids])

    out = walk(e)
    return out, used_div[0]


def _rebuild(node: Expr, kids):
    if isinstance(node, ArrayElem):
        return ArrayElem(node.array, kids[0])
    if isinstance(node, Sum):
        return Sum(node.var, kids[0], kids[1], kids[2])
    if isinstance(node, Add):
        return Add(kids[0], kids[1])
    if isinstance(node, Sub):
        return Sub(kids[0], kids[1])
    if isinstance(node, Mul):
        return Mul(kids[0], kids[1])
    if isinstance(node, Div):
        return Div(kids[0], kids[1])
    if isinstance(node, Pow):
        return Pow(kids[0], kids[1])
    if isinstance(node, Poly):
        return Poly(node.ref, kids[1])
    return node


def derive_update(
    spec: OperationSpec,
    candidate: InvariantCandidate,
    mode: str,
    step6: Predicate,
    step7: Predicate,
):
    """Solve the step-7 holes against the update template grammar.

    The state holding just before the update (the invariant in indexed mode;
    its repartitioned restatement in partitioned mode) supplies the
    equalities: its defining expression for the output replaces that
    expression wherever it occurs in step 7, and a power tracker absorbs
    point-powers one step around its own.  Returns (SimAssign, used_division).
    """
    shape = recognize_post(spec)
    point = shape.point
    out = spec.output()
    targets = (out,) + candidate.aux_names()
    holes = _update_holes(spec, candidate)
    before = step6 if mode == FLAME else candidate.predicate

    out_defs = [
        a.rhs
        for a in before.atoms
        if isinstance(a, Eq) and isinstance(a.lhs, Var) and a.lhs.name == out
    ]
    tracker = None
    for a in before.atoms:
        if (
            isinstance(a, Eq)
            and isinstance(a.lhs, Var)
            and a.lhs.name in candidate.aux_names()
        ):
            tracker = (a.lhs.name, normalize(a.rhs))

    solved = {}
    used_div = False
    for target, hole in zip(targets, holes):
        atom = next(
            (
                a
                for a in step7.atoms
                if isinstance(a, Eq) and isinstance(a.lhs, Var) and a.lhs.name == hole
            ),
            None,
        )
        if atom is None:
            raise NoTemplateMatch(
                f"step 7 does not constrain the update of {target!r}",
                before=step6, after=step7,
            )
        rhs = expand(atom.rhs)
        for definition in out_defs:
            rhs = replace_subterm(rhs, ac_key(expand(definition)), Var(out), ac_key)
        if tracker is not None:
            rhs, div_here = _rewrite_with_tracker(rhs, tracker[0], tracker[1], point)
            used_div = used_div or div_here
        rhs = normalize(rhs)
        if contains_sum_or_poly(rhs):
            raise NoTemplateMatch(
                f"update of {target!r} still contains unreduced reduction terms",
                before=step6, after=step7,
            )
        if _matches_template(rhs, target, point) is None:
            raise NoTemplateMatch(
                f"update of {target!r} fits no template in the grammar",
                before=step6, after=step7,
            )
        solved[target] = rhs
    update = SimAssign(targets, tuple(solved[t] for t in targets))
    if not used_div:
        used_div = any(
            isinstance(t, Div) and ac_equal(t.rhs, point)
            for e in update.exprs
            for t in subterms(e)
        )
    return update, used_div


# ---------------------------------------------------------------------------
# The full derivation and its verification


def candidate_by_id(spec: OperationSpec, invariant_id: int, mode: str) -> InvariantCandidate:
    for c in enumerate_invariants(spec, mode):
        if c.cid == invariant_id:
            if not c.valid:
                raise DerivationError(
                    f"invariant {invariant_id} is rejected ({c.reason})"
                )
            return c
    raise DerivationError(f"no invariant with id {invariant_id}")


def derive(
    spec: OperationSpec,
    invariant_id: int,
    mode: str = INDEXED,
    trials: int = DEFAULT_TRIALS,
    seed: int = DEFAULT_SEED,
) -> Worksheet:
    """Run steps 1 through 8 and verify the result.  Deterministic in
    (spec, invariant id, mode, seed)."""
    spec.validate()
    with declared_sizes(size_bindings(spec)):
        return _derive(spec, invariant_id, mode, trials, seed)


def _derive(spec, invariant_id, mode, trials, seed) -> Worksheet:
    candidate = candidate_by_id(spec, invariant_id, mode)
    pre = spec.pre if mode == INDEXED else TRUE
    post = spec.post if mode == INDEXED else flame_post(spec)

    w = Worksheet(mode=mode, spec=spec, candidate=candidate, pre=pre, post=post)
    w.provenance = {"1a": GIVEN, "1b": GIVEN, "2": DERIVED}

    w.guard = derive_guard(candidate, post, spec, mode)
    w.provenance["3"] = DERIVED
    w.init, w.init_wp = derive_init(spec, candidate, mode)
    w.provenance["4a"] = DERIVED
    w.provenance["4b"] = DERIVED
    w.index_update, w.repartition, w.merge = derive_traversal(spec, candidate, mode)
    w.provenance["5"] = DERIVED
    w.step6 = compute_step6(candidate, mode, w.index_update, w.repartition)
    w.provenance["6"] = DERIVED
    w.step7 = compute_step7(spec, candidate, mode, w.step6, w.merge)
    w.provenance["7"] = DERIVED
    w.update, used_div = derive_update(spec, candidate, mode, w.step6, w.step7)
    w.provenance["8"] = DERIVED

    w.requires = pre
    notes = list(candidate.repairs)
    if used_div:
        point = next(iter(spec.scalar_inputs()))
        w.requires = pre.conjoin(Predicate((Ne(Var(point), IntConst(0)),)))
        notes.append(
            f"update divides by {point}: the worksheet additionally requires {point} != 0"
        )
    w.notes = tuple(notes)
    w.obligations = verify(w, trials=trials, seed=seed)
    return w


def _descent_measure(w: Worksheet):
    if w.mode == INDEXED:
        k = w.spec.index()
        n = w.spec.size()
        if w.candidate.direction == LAST_TO_FIRST:
            return lambda s: s.scalars[k]
        return lambda s: s.scalars[n] - s.scalars[k]
    vec = w.spec.vector().name
    side = "T" if w.candidate.direction == LAST_TO_FIRST else "B"
    ref = Len(VecRef(vec, side))
    return lambda s: evaluate(ref, s)


def verify(
    w: Worksheet,
    trials: int = DEFAULT_TRIALS,
    seed: int = DEFAULT_SEED,
) -> List[Obligation]:
    """The three loop-correctness obligations plus the bounded-descent check.

    Every verdict carries its tier, so a report can distinguish a syntactic
    proof from seeded testing.
    """
    with declared_sizes(size_bindings(w.spec)):
        return _verify(w, trials, seed)


def _verify(w: Worksheet, trials: int, seed: int) -> List[Obligation]:
    if not w.filled():
        raise IncompleteWorksheet("worksheet has unfilled slots")
    ctx = w.context()
    inv = w.invariant()
    body = w.body()
    at_top = inv.conjoin(w.guard).conjoin(_extra_requires(w))
    never_entered = entail(at_top, _FALSE)

    init_v = implies(w.requires, wp(w.full_init(), inv), ctx, trials, seed)

    try:
        goal = wp(body, inv)
        induct_t1 = entail(at_top, goal)
    except UnsupportedStatement:
        induct_t1 = _induction_by_stages(w, inv, at_top)
    if induct_t1:
        induct_v = Verdict.proved()
    else:
        induct_v = _guarded_test(
            lambda: hoare_test(at_top, body, inv, ctx, trials, seed), never_entered
        )

    exit_v = implies(w.exit_assertion(), w.post, ctx, trials, seed)
    descent_v = _guarded_test(
        lambda: descent_test(at_top, body, _descent_measure(w), ctx, trials, seed),
        never_entered,
    )

    return [
        Obligation("initialization", "requires => wp(init, invariant)", init_v),
        Obligation("induction", "{invariant && guard} body {invariant}", induct_v),
        Obligation("exit", "invariant && !guard => postcondition", exit_v),
        Obligation("descent", "each iteration strictly shrinks the unprocessed part", descent_v),
    ]


def _extra_requires(w: Worksheet) -> Predicate:
    extras = tuple(a for a in w.requires.atoms if isinstance(a, Ne))
    return Predicate(extras)


_FALSE = Predicate((Lt(IntConst(0), IntConst(0)),))


def _guarded_test(runner, never_entered: bool) -> Verdict:
    """Loop-body checks are vacuous when the loop can provably never be
    entered; otherwise a failure to sample any entry state is reported as
    unknown rather than silently passed."""
    from .errors import VacuousPrecondition

    try:
        return runner()
    except VacuousPrecondition as err:
        if never_entered:
            return Verdict.proved()
        return Verdict(kind="unknown", tier="none", reason=str(err))


def _induction_by_stages(w: Worksheet, inv: Predicate, at_top: Predicate) -> bool:
    """Partitioned-mode induction: the repartition is a pure renaming, so
    push the top-of-loop state forward through it, then reason backward
    through merge and update."""
    from .wp import CounterIncr

    stage_top = forward_repartition(at_top, w.repartition)
    tail = []
    tail.append(w.update)
    if w.counted():
        tail.append(CounterIncr(w.cost.counter, w.cost.increment))
    tail.append(w.merge)
    goal = wp(seq(*tail), inv)
    return entail(stage_top, goal)
