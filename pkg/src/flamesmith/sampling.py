"""Seeded random state generation for the randomized testing tier.

Draw ranges follow the engine's trust model: short vectors (length 0..8)
with small integer entries, evaluation points in [-3, 3], index values in
[0, n].  Output and auxiliary scalars are forced constructively from any
defining equation in the predicate being satisfied, because hitting
`y = sum(...)` by luck is hopeless; everything else is rejection sampling.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Tuple

from .errors import EvalError
from .expr import State, Var, evaluate
from .predicate import Eq, Predicate, predicate_holds

DEFAULT_TRIALS = 1000
DEFAULT_SEED = 42

VEC_MAX_LEN = 8
ENTRY_RANGE = (-5, 5)
POINT_RANGE = (-3, 3)
FREE_RANGE = (-5, 5)


@dataclass(frozen=True)
class Context:
    """Declared variable context shared by both sides of an implication."""

    vector: str
    size_name: str
    point_inputs: Tuple[str, ...] = ()
    outputs: Tuple[str, ...] = ()
    index: Optional[str] = None
    auxes: Tuple[str, ...] = ()
    partitioned: bool = False

    def determined(self) -> Tuple[str, ...]:
        return self.outputs + self.auxes


def draw_base_state(ctx: Context, rng: random.Random) -> State:
    n = rng.randint(0, VEC_MAX_LEN)
    vec = tuple(Fraction(rng.randint(*ENTRY_RANGE)) for _ in range(n))
    scalars = {ctx.size_name: Fraction(n)}
    for name in ctx.point_inputs:
        scalars[name] = Fraction(rng.randint(*POINT_RANGE))
    if ctx.index is not None:
        scalars[ctx.index] = Fraction(rng.randint(0, n))
    for name in ctx.determined():
        scalars[name] = Fraction(rng.randint(*FREE_RANGE))
    state = State(scalars=scalars, vectors={ctx.vector: vec})
    if ctx.partitioned:
        state.splits[ctx.vector] = rng.randint(0, n)
    return state


def force_equations(p: Predicate, ctx: Context, state: State) -> bool:
    """Overwrite determined scalars so `var = expr` atoms of `p` hold.

    Iterates until stable; returns False when some defining expression cannot
    be evaluated (the draw is then rejected).
    """
    determined = set(ctx.determined())
    pending = [
        a for a in p.atoms
        if isinstance(a, Eq) and isinstance(a.lhs, Var) and a.lhs.name in determined
    ]
    progress = True
    while pending and progress:
        progress = False
        remaining = []
        for a in pending:
            try:
                state.scalars[a.lhs.name] = evaluate(a.rhs, state)
                progress = True
            except EvalError:
                remaining.append(a)
        pending = remaining
    return not pending


def sample_satisfying(
    p: Predicate, ctx: Context, rng: random.Random
) -> Optional[State]:
    """One draw aimed at `p`: base draw, constructive equations, then check."""
    state = draw_base_state(ctx, rng)
    if not force_equations(p, ctx, state):
        return None
    try:
        if predicate_holds(p, state):
            return state
    except EvalError:
        return None
    return None
