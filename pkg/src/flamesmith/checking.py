"""The implication checker and Hoare-triple tester behind every obligation.

Two tiers, recorded on every verdict so reports never overstate what was
shown.  Tier 1 (`proved`, tier "syntactic") is the exact entailment from
`predicate.entail`.  Tier 2 (`tested`/`falsified`, tier "randomized") is a
seeded search for counterexamples; a Falsified verdict carries the concrete
state and is replayable by re-running the same check on that state.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable, Optional

from .errors import EvalError, UnboundVariable, VacuousPrecondition
from .expr import State
from .predicate import Predicate, entail, predicate_holds
from .sampling import (
    DEFAULT_SEED,
    DEFAULT_TRIALS,
    Context,
    sample_satisfying,
)
from .wp import Stmt, exec_stmt


@dataclass(frozen=True)
class Verdict:
    kind: str  # "proved" | "tested" | "falsified" | "unknown"
    tier: str  # "syntactic" | "randomized" | "none"
    trials: int = 0
    seed: int = 0
    satisfying: int = 0
    counterexample: Optional[State] = None
    reason: str = ""

    @staticmethod
    def proved() -> "Verdict":
        return Verdict(kind="proved", tier="syntactic")

    @staticmethod
    def tested(trials: int, seed: int, satisfying: int) -> "Verdict":
        return Verdict(
            kind="tested", tier="randomized", trials=trials, seed=seed,
            satisfying=satisfying,
        )

    @staticmethod
    def falsified(state: State, seed: int, reason: str = "") -> "Verdict":
        return Verdict(
            kind="falsified", tier="randomized", seed=seed,
            counterexample=state, reason=reason,
        )

    @property
    def ok(self) -> bool:
        return self.kind in ("proved", "tested")

    def label(self) -> str:
        if self.kind == "proved":
            return "PROVED"
        if self.kind == "tested":
            return f"TESTED({self.satisfying}/{self.trials})"
        if self.kind == "falsified":
            return "FALSIFIED"
        return "UNKNOWN"


def implies(
    p: Predicate,
    q: Predicate,
    ctx: Context,
    trials: int = DEFAULT_TRIALS,
    seed: int = DEFAULT_SEED,
) -> Verdict:
    """Does `p` imply `q`?  Proved syntactically when possible, otherwise a
    seeded search for a state satisfying `p` but not `q`."""
    if entail(p, q):
        return Verdict.proved()
    rng = random.Random(seed)
    satisfying = 0
    for _ in range(trials):
        state = sample_satisfying(p, ctx, rng)
        if state is None:
            continue
        satisfying += 1
        try:
            if not predicate_holds(q, state):
                return Verdict.falsified(state, seed, reason="consequent is false")
        except UnboundVariable:
            # a name outside the declared context is a caller error, not a
            # counterexample
            raise
        except EvalError as err:
            return Verdict.falsified(
                state, seed, reason=f"consequent evaluation failed: {err}"
            )
    return Verdict.tested(trials, seed, satisfying)


def hoare_test(
    pre: Predicate,
    s: Stmt,
    post: Predicate,
    ctx: Context,
    trials: int = DEFAULT_TRIALS,
    seed: int = DEFAULT_SEED,
) -> Verdict:
    """Test the triple {pre} s {post} by executing `s` from sampled
    pre-states.  Raises VacuousPrecondition when no satisfying state is found
    within 100 * trials draws."""
    rng = random.Random(seed)
    found = 0
    draws = 0
    cap = 100 * trials
    while found < trials and draws < cap:
        draws += 1
        state = sample_satisfying(pre, ctx, rng)
        if state is None:
            continue
        found += 1
        working = state.copy()
        try:
            exec_stmt(s, working)
        except EvalError as err:
            return Verdict.falsified(state, seed, reason=f"execution failed: {err}")
        try:
            if not predicate_holds(post, working):
                return Verdict.falsified(
                    state, seed, reason="postcondition is false after execution"
                )
        except EvalError as err:
            return Verdict.falsified(
                state, seed, reason=f"postcondition evaluation failed: {err}"
            )
    if found == 0:
        raise VacuousPrecondition(draws)
    return Verdict.tested(found, seed, found)


def descent_test(
    pre: Predicate,
    body: Stmt,
    measure: Callable[[State], object],
    ctx: Context,
    trials: int = DEFAULT_TRIALS,
    seed: int = DEFAULT_SEED,
) -> Verdict:
    """Check that one body iteration strictly decreases `measure` from every
    sampled pre-state: the bounded-descent plumbing behind partial
    correctness."""
    rng = random.Random(seed)
    found = 0
    draws = 0
    cap = 100 * trials
    while found < trials and draws < cap:
        draws += 1
        state = sample_satisfying(pre, ctx, rng)
        if state is None:
            continue
        found += 1
        try:
            before = measure(state)
            working = state.copy()
            exec_stmt(body, working)
            after = measure(working)
        except EvalError as err:
            return Verdict.falsified(state, seed, reason=f"execution failed: {err}")
        if not after < before:
            return Verdict.falsified(
                state, seed,
                reason=f"loop measure did not decrease ({before} -> {after})",
            )
    if found == 0:
        raise VacuousPrecondition(draws)
    return Verdict.tested(found, seed, found)
