"""Commands, their weakest-precondition transformers, and concrete execution.

The command fragment is exactly what the derivation worksheets use:
simultaneous assignment, sequencing, a single while loop, the partition
bookkeeping steps (which rename vector segments and compute nothing), and a
counter increment for cost instrumentation.

`wp` works backward over loop-free commands; the partition steps act on
predicates purely by rewriting segment paths, expanding a polynomial over a
stacked pair of segments into `low-part + high-part * point^len(low-part)`.
`exec_stmt` is the matching big-step semantics on concrete states, so the
two can be cross-checked against each other.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Tuple

from .errors import NonTermination, UnsupportedStatement, TargetAbsent
from .expr import (
    Add,
    Expr,
    IntConst,
    Len,
    Mul,
    Poly,
    Pow,
    State,
    Sub,
    Var,
    VecRef,
    evaluate,
    free_vars,
    rewrite_refs,
    substitute,
)
from .predicate import Predicate, normalize_pred, predicate_holds

EXEC_ITER_CAP = 10_000


@dataclass(frozen=True)
class Stmt:
    pass


@dataclass(frozen=True)
class Skip(Stmt):
    pass


@dataclass(frozen=True)
class SimAssign(Stmt):
    """Simultaneous assignment: all expressions evaluate in the pre-state."""

    targets: Tuple[str, ...]
    exprs: Tuple[Expr, ...]

    def __post_init__(self):
        if len(self.targets) != len(set(self.targets)):
            raise ValueError("duplicate assignment targets")
        if len(self.targets) != len(self.exprs):
            raise ValueError("targets and expressions must align")


@dataclass(frozen=True)
class Seq(Stmt):
    first: Stmt
    second: Stmt


@dataclass(frozen=True)
class While(Stmt):
    guard: Predicate
    body: Stmt


@dataclass(frozen=True)
class PartitionInit(Stmt):
    """Split a vector in two, placing the cursor so `empty_side` has 0 elements."""

    vector: str
    empty_side: str  # "T" | "B"


@dataclass(frozen=True)
class Repartition(Stmt):
    """Expose one element adjacent to the cursor; `expose_from` names the
    two-way side the element leaves ("T": last element of the top part,
    "B": first element of the bottom part)."""

    vector: str
    expose_from: str


@dataclass(frozen=True)
class MergeBack(Stmt):
    """Reabsorb the exposed element; `into` names the side that grows."""

    vector: str
    into: str


@dataclass(frozen=True)
class CounterIncr(Stmt):
    counter: str
    amount: int


def seq(*stmts: Stmt) -> Stmt:
    real = [s for s in stmts if not isinstance(s, Skip)]
    if not real:
        return Skip()
    acc = real[0]
    for s in real[1:]:
        acc = Seq(acc, s)
    return acc


def seq_items(s: Stmt):
    if isinstance(s, Seq):
        yield from seq_items(s.first)
        yield from seq_items(s.second)
    elif not isinstance(s, Skip):
        yield s


# ---------------------------------------------------------------------------
# Segment-path rewriting (the "no computation happens here" steps)


def _stack_poly(refs, point: Expr) -> Expr:
    """Polynomial over stacked segments: low + high * point^len(low)."""
    first, rest = refs[0], refs[1:]
    low = Poly(first, point)
    if not rest:
        return low
    high = _stack_poly(rest, point)
    return Add(low, Mul(high, Pow(point, Len(first))))


def _stack_len(refs) -> Expr:
    acc: Expr = Len(refs[0])
    for r in refs[1:]:
        acc = Add(acc, Len(r))
    return acc


def rewrite_partition(p: Predicate, vector: str, t_parts, b_parts) -> Predicate:
    """Rewrite every reference to `vector`.T / `vector`.B as the stacked
    segments named by `t_parts` / `b_parts` (tuples of part names)."""

    def fn(node):
        target = None
        if isinstance(node, (Len, Poly)) and node.ref.vector == vector:
            target = node.ref.part
        elif isinstance(node, VecRef) and node.vector == vector:
            target = node.part
        if target not in ("T", "B"):
            return node
        parts = t_parts if target == "T" else b_parts
        refs = tuple(VecRef(vector, part) for part in parts)
        if isinstance(node, Len):
            return _stack_len(refs)
        if isinstance(node, Poly):
            return _stack_poly(refs, node.point)
        if len(refs) == 1:
            return refs[0]
        return node

    atoms = []
    for a in p.atoms:
        atoms.append(type(a)(rewrite_refs(a.lhs, fn), rewrite_refs(a.rhs, fn)))
    return normalize_pred(Predicate(tuple(atoms)))


def collapse_empty_side(p: Predicate, vector: str, empty_side: str) -> Predicate:
    """Rewrite for the moment just before PartitionInit: the named side is
    empty and the other side is the whole vector."""
    other = "B" if empty_side == "T" else "T"

    def fn(node):
        if isinstance(node, Poly) and node.ref.vector == vector:
            if node.ref.part == empty_side:
                return IntConst(0)
            if node.ref.part == other:
                return Poly(VecRef(vector), node.point)
        if isinstance(node, Len) and node.ref.vector == vector:
            if node.ref.part == empty_side:
                return IntConst(0)
            if node.ref.part == other:
                return Len(VecRef(vector))
        return node

    atoms = []
    for a in p.atoms:
        atoms.append(type(a)(rewrite_refs(a.lhs, fn), rewrite_refs(a.rhs, fn)))
    return normalize_pred(Predicate(tuple(atoms)))


# ---------------------------------------------------------------------------
# Weakest preconditions


def wp(s: Stmt, r: Predicate) -> Predicate:
    """Weakest precondition of a loop-free command; the result is normalized."""
    if isinstance(s, Skip):
        return normalize_pred(r)
    if isinstance(s, SimAssign):
        bindings = list(zip(s.targets, s.exprs))
        atoms = []
        for a in r.atoms:
            atoms.append(type(a)(substitute(a.lhs, bindings), substitute(a.rhs, bindings)))
        return normalize_pred(Predicate(tuple(atoms)))
    if isinstance(s, CounterIncr):
        return wp(
            SimAssign((s.counter,), (Add(Var(s.counter), IntConst(s.amount)),)), r
        )
    if isinstance(s, Seq):
        return wp(s.first, wp(s.second, r))
    if isinstance(s, PartitionInit):
        return collapse_empty_side(r, s.vector, s.empty_side)
    if isinstance(s, MergeBack):
        # After the merge, one side regained the exposed element.
        if s.into == "B":
            return rewrite_partition(r, s.vector, ("0",), ("1", "2"))
        return rewrite_partition(r, s.vector, ("0", "1"), ("2",))
    if isinstance(s, Repartition):
        # Segment names untouched by the exposure rename in place; a length
        # next to the exposed element loses one; the exposed element itself
        # has no two-way spelling, so its appearance is a hard error.
        whole_map = {"2": "B"} if s.expose_from == "T" else {"0": "T"}
        shrunk = "0" if s.expose_from == "T" else "2"
        shrunk_source = s.expose_from

        def fn(node):
            ref = node.ref if isinstance(node, (Len, Poly)) else node
            if not isinstance(ref, VecRef) or ref.vector != s.vector:
                return node
            if ref.part in whole_map:
                new_ref = VecRef(s.vector, whole_map[ref.part])
                if isinstance(node, Len):
                    return Len(new_ref)
                if isinstance(node, Poly):
                    return Poly(new_ref, node.point)
                return new_ref
            if isinstance(node, Len) and ref.part == shrunk:
                return Sub(Len(VecRef(s.vector, shrunk_source)), IntConst(1))
            if ref.part in ("0", "1", "2"):
                raise UnsupportedStatement(
                    f"cannot express {ref.vector}.{ref.part} before the repartition"
                )
            return node

        atoms = []
        for a in r.atoms:
            atoms.append(type(a)(rewrite_refs(a.lhs, fn), rewrite_refs(a.rhs, fn)))
        return normalize_pred(Predicate(tuple(atoms)))
    if isinstance(s, While):
        raise UnsupportedStatement("wp of a loop is what the worksheet replaces")
    raise TypeError(f"unknown statement {s!r}")


def forward_repartition(p: Predicate, s: Repartition) -> Predicate:
    """Forward renaming through a repartition: the predicate held in two-way
    names; restate it in the exposed three-way names."""
    if s.expose_from == "T":
        return rewrite_partition(p, s.vector, ("0", "1"), ("2",))
    return rewrite_partition(p, s.vector, ("0",), ("1", "2"))


def wp_symbolic_assign(targets, r: Predicate, hole_names) -> Predicate:
    """Substitute a fresh hole symbol for each target: the pre-update
    obligation that update synthesis solves."""
    free = set()
    for a in r.atoms:
        free |= free_vars(a.lhs) | free_vars(a.rhs)
    for t in targets:
        if t not in free:
            raise TargetAbsent(f"target {t!r} does not occur in the predicate")
    assign = SimAssign(tuple(targets), tuple(Var(h) for h in hole_names))
    return wp(assign, r)


# ---------------------------------------------------------------------------
# Concrete execution


def exec_stmt(s: Stmt, state: State, iter_cap: int = EXEC_ITER_CAP) -> State:
    """Execute `s`, mutating and returning `state` (callers pass copies)."""
    if isinstance(s, Skip):
        return state
    if isinstance(s, SimAssign):
        values = [evaluate(e, state) for e in s.exprs]
        for name, value in zip(s.targets, values):
            state.scalars[name] = value
        return state
    if isinstance(s, CounterIncr):
        current = state.scalars.get(s.counter, Fraction(0))
        state.scalars[s.counter] = current + s.amount
        return state
    if isinstance(s, Seq):
        exec_stmt(s.first, state, iter_cap)
        return exec_stmt(s.second, state, iter_cap)
    if isinstance(s, While):
        count = 0
        while predicate_holds(s.guard, state):
            exec_stmt(s.body, state, iter_cap)
            count += 1
            if count > iter_cap:
                raise NonTermination(iter_cap)
        return state
    if isinstance(s, PartitionInit):
        length = len(state.vectors[s.vector])
        state.splits[s.vector] = length if s.empty_side == "B" else 0
        return state
    if isinstance(s, Repartition):
        cursor = state.splits[s.vector]
        if s.expose_from == "T":
            state.exposed[s.vector] = (cursor - 1, cursor)
        else:
            state.exposed[s.vector] = (cursor, cursor + 1)
        return state
    if isinstance(s, MergeBack):
        p, q = state.exposed.pop(s.vector)
        state.splits[s.vector] = p if s.into == "B" else q
        return state
    raise TypeError(f"unknown statement {s!r}")
