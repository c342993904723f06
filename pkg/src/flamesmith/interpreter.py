"""Concrete execution of derived algorithms, with optional runtime assertion
checking, plus the independent brute-force oracle.

The oracle computes each term with repeated multiplication and shares no
code with the derivation or normalization paths, so agreement with it is a
meaningful check.  The iteration cap turns accidental nontermination into a
diagnosable error; only partial correctness is ever proved, so the cap is
the safety net.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence

from .errors import InvariantViolation, NonTermination
from .expr import State
from .predicate import predicate_holds
from .wp import exec_stmt


@dataclass
class RunResult:
    state: State
    result: Fraction
    iterations: List[dict] = field(default_factory=list)
    initial: Optional[dict] = None

    def trace_of(self, name: str):
        values = []
        if self.initial is not None:
            values.append(self.initial[name])
        values.extend(snap[name] for snap in self.iterations)
        return values


def _snapshot(state: State, vec: str) -> dict:
    snap = dict(state.scalars)
    if vec in state.splits:
        snap["split"] = state.splits[vec]
    return snap


def make_input_state(worksheet, coeffs: Sequence[Fraction], point: Fraction) -> State:
    spec = worksheet.spec
    scalars = {spec.size(): Fraction(len(coeffs))}
    inputs = spec.scalar_inputs()
    if inputs:
        scalars[inputs[0]] = Fraction(point)
    return State(scalars=scalars, vectors={spec.vector().name: tuple(Fraction(c) for c in coeffs)})


def run(worksheet, input_state: State, check_invariants: bool = False) -> RunResult:
    """Execute init and loop; with `check_invariants`, assert the invariant
    at the loop head and bottom of every iteration and the exit assertion
    after the loop.  The trace records one scalar snapshot per iteration."""
    spec = worksheet.spec
    vec = spec.vector().name
    state = input_state.copy()
    exec_stmt(worksheet.full_init(), state)

    inv = worksheet.invariant()
    guard = worksheet.guard
    body = worksheet.body()
    n = len(state.vectors[vec])
    cap = 10 * n + 10

    result = RunResult(state=state, result=Fraction(0))
    result.initial = _snapshot(state, vec)
    iteration = 0
    while predicate_holds(guard, state):
        if check_invariants and not predicate_holds(inv, state):
            raise InvariantViolation(iteration, "loop head", state.copy())
        exec_stmt(body, state)
        iteration += 1
        if check_invariants and not predicate_holds(inv, state):
            raise InvariantViolation(iteration, "loop bottom", state.copy())
        result.iterations.append(_snapshot(state, vec))
        if iteration > cap:
            raise NonTermination(cap)
    if check_invariants and not predicate_holds(worksheet.exit_assertion(), state):
        raise InvariantViolation(iteration, "exit assertion", state.copy())
    result.result = state.scalars[worksheet.output_name()]
    return result


def oracle(coeffs: Sequence[Fraction], point) -> Fraction:
    """Direct summation, term by term, powers built by repeated
    multiplication.  Deliberately not an accumulation scheme."""
    x = Fraction(point)
    total = Fraction(0)
    for position, coeff in enumerate(coeffs):
        power = Fraction(1)
        for _ in range(position):
            power *= x
        total += Fraction(coeff) * power
    return total


def nested_form_identity_check(coeffs: Sequence[Fraction], point) -> bool:
    """Evaluate the explicit nested form
    c0 + (c1 + (c2 + (... (c_{n-1} + 0*x) * x ...) * x) * x
    and compare with the oracle."""
    x = Fraction(point)
    acc = Fraction(0) * x
    for coeff in reversed([Fraction(c) for c in coeffs]):
        acc = coeff + acc * x
    return acc == oracle(coeffs, point)
