"""Operation counting: instrument a worksheet with a flop counter, extract
and solve the cost recurrence, and prove the cost invariant with the same
loop machinery used for functional correctness.

A flop is one scalar ring operation (add, sub, mul, div).  A power with a
constant exponent e expands to e - 1 multiplies; a power with a symbolic
exponent makes the per-iteration cost non-constant, which this module
refuses to solve rather than guess at.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Tuple

from .checking import DEFAULT_SEED, DEFAULT_TRIALS
from .errors import CostInvariantFalsified, UnsupportedRecurrence
from .expr import (
    Add,
    ArrayElem,
    Div,
    Expr,
    IntConst,
    Len,
    Mul,
    Pow,
    State,
    Sub,
    Sum,
    Var,
    VecRef,
    evaluate,
)
from .interpreter import make_input_state, run
from .invariants import INDEXED, LAST_TO_FIRST, size_bindings
from .normalize import declared_sizes, linsimp, normalize
from .predicate import Eq, Predicate
from .worksheet import CostInstrumentation, Obligation, Worksheet, verify
from .wp import SimAssign


def count_update_flops(update: SimAssign) -> Tuple[Optional[int], Expr]:
    """Flops performed by one execution of the update.

    Returns (constant, expression): `constant` is None when a symbolic
    exponent makes the count input-dependent; `expression` is the count in
    either case.  Index arithmetic inside an array subscript is addressing,
    not a flop.
    """
    total: Expr = IntConst(0)

    def walk(e: Expr) -> Expr:
        if isinstance(e, (IntConst, Var, VecRef, Len)):
            return IntConst(0)
        if isinstance(e, ArrayElem):
            return IntConst(0)
        if isinstance(e, (Add, Sub, Mul, Div)):
            return Add(IntConst(1), Add(walk(e.lhs), walk(e.rhs)))
        if isinstance(e, Pow):
            if isinstance(e.exp, IntConst):
                mults = max(e.exp.value - 1, 0)
                return Add(IntConst(mults), walk(e.base))
            return Add(Sub(e.exp, IntConst(1)), walk(e.base))
        if isinstance(e, Sum):
            raise UnsupportedRecurrence("an update must not contain a summation")
        raise TypeError(f"unknown expression node {e!r}")

    for expr in update.exprs:
        total = Add(total, walk(expr))
    total = normalize(total)
    if isinstance(total, IntConst):
        return total.value, total
    lin = linsimp(total)
    if lin is not None and not lin[0]:
        return int(lin[1]), total
    return None, total


@dataclass(frozen=True)
class Recurrence:
    base: int
    increment: Optional[int]
    symbolic_increment: Optional[Expr] = None

    def describe(self) -> str:
        if self.increment is None:
            return f"C_0 = {self.base}, C_(k+1) = C_k + <non-constant>"
        return f"C_0 = {self.base}, C_(k+1) = C_k + {self.increment}"


def processed_expr(w: Worksheet) -> Expr:
    """Number of elements already folded into the output, as an expression
    over the loop state."""
    if w.mode == INDEXED:
        n = Var(w.spec.size())
        k = Var(w.spec.index())
        if w.candidate.direction == LAST_TO_FIRST:
            return Sub(n, k)
        return k
    vec = w.spec.vector().name
    side = "B" if w.candidate.direction == LAST_TO_FIRST else "T"
    return Len(VecRef(vec, side))


def total_cost_expr(w: Worksheet, increment: int) -> Expr:
    if w.mode == INDEXED:
        return normalize(Mul(IntConst(increment), Var(w.spec.size())))
    return normalize(Mul(IntConst(increment), Len(VecRef(w.spec.vector().name))))


def instrument(w: Worksheet) -> Worksheet:
    """Attach the counter: C := 0 joins the initialization, C := C + c joins
    the loop body, and the cost invariant joins the loop invariant.  With a
    non-constant per-iteration cost the counter is left out and only the
    symbolic count is recorded (the recurrence solver then refuses it)."""
    with declared_sizes(size_bindings(w.spec)):
        return _instrument(w)


def _instrument(w: Worksheet) -> Worksheet:
    constant, count_expr = count_update_flops(w.update)
    counter = _fresh_counter(w)
    if constant is None:
        cost = CostInstrumentation(
            counter=counter,
            increment=None,
            increment_expr=count_expr,
            invariant_atom=None,
            processed=None,
            total=None,
        )
    else:
        processed = processed_expr(w)
        atom = Eq(Var(counter), normalize(Mul(IntConst(constant), processed)))
        cost = CostInstrumentation(
            counter=counter,
            increment=constant,
            increment_expr=count_expr,
            invariant_atom=atom,
            processed=processed,
            total=total_cost_expr(w, constant),
        )
    out = w.copy()
    out.cost = cost
    return out


def _fresh_counter(w: Worksheet) -> str:
    taken = {d.name for d in w.spec.decls} | {w.spec.size()}
    taken |= set(w.candidate.aux_names())
    name = "C"
    while name in taken:
        name += "_"
    return name


def recurrence_of(w: Worksheet) -> Recurrence:
    if w.cost is None:
        raise UnsupportedRecurrence("worksheet is not instrumented")
    if w.cost.increment is None:
        return Recurrence(0, None, w.cost.increment_expr)
    return Recurrence(0, w.cost.increment)


def solve_recurrence(rec: Recurrence) -> Expr:
    """Closed form of C_0 = b, C_(k+1) = C_k + c, checked at k = 0..16."""
    if rec.increment is None:
        raise UnsupportedRecurrence(
            "per-iteration cost is not a constant flop count"
        )
    k = Var("k")
    closed = normalize(Add(IntConst(rec.base), Mul(IntConst(rec.increment), k)))
    state = State()
    value = rec.base
    for step in range(17):
        state.scalars["k"] = Fraction(step)
        got = evaluate(closed, state)
        if got != value:
            raise UnsupportedRecurrence(
                f"closed form disagrees with the recurrence at k={step}"
            )
        value += rec.increment
    return closed


def check_recurrence_symbolically(closed: Expr, rec: Recurrence) -> bool:
    """closed(k+1) - closed(k) simplifies to exactly the increment."""
    from .expr import substitute
    from .normalize import const_difference

    stepped = substitute(closed, [("k", Add(Var("k"), IntConst(1)))])
    return const_difference(stepped, closed) == rec.increment


@dataclass
class CostReport:
    increment: Optional[int]
    increment_expr: Expr
    recurrence: Recurrence
    closed_form: Optional[Expr]
    cost_invariant: Optional[Predicate]
    total_cost: Optional[Expr]
    obligations: List[Obligation] = field(default_factory=list)
    runtime_counts: List[Tuple[int, int]] = field(default_factory=list)
    runtime_ok: bool = True


def prove_cost(
    w: Worksheet,
    trials: int = DEFAULT_TRIALS,
    seed: int = DEFAULT_SEED,
    max_n: int = 64,
) -> CostReport:
    """Discharge the loop obligations for the counter-augmented invariant and
    measure the counter for every input size up to `max_n`.  Measured counts
    must match the closed form exactly."""
    if w.cost is None:
        w = instrument(w)
    rec = recurrence_of(w)
    closed = solve_recurrence(rec)  # raises on non-constant increments

    obligations = verify(w, trials=trials, seed=seed)
    for o in obligations:
        if not o.verdict.ok:
            raise CostInvariantFalsified(o.verdict.counterexample)

    counter = w.cost.counter
    rng = random.Random(seed)
    counts: List[Tuple[int, int]] = []
    ok = True
    for n in range(max_n + 1):
        coeffs = [rng.randint(-5, 5) for _ in range(n)]
        # x = 1 stays inside every worksheet's domain, including the
        # division-guarded ones.
        state = make_input_state(w, coeffs, Fraction(1))
        result = run(w, state)
        measured = result.state.scalars.get(counter, Fraction(0))
        expected = evaluate(w.cost.total, result.state)
        counts.append((n, int(measured)))
        if measured != expected:
            ok = False
    report = CostReport(
        increment=w.cost.increment,
        increment_expr=w.cost.increment_expr,
        recurrence=rec,
        closed_form=closed,
        cost_invariant=Predicate((w.cost.invariant_atom,)),
        total_cost=w.cost.total,
        obligations=obligations,
        runtime_counts=counts,
        runtime_ok=ok,
    )
    if not ok:
        raise CostInvariantFalsified(counts)
    return report
