"""Predicates over expressions and the syntactic entailment tier.

A predicate is a conjunction of comparison atoms; negation exists only at
the atom level (loop-guard negation), never over whole predicates.  The
`entail` function is the "proved" tier of the implication checker: it
combines exact linear reasoning over integer index atoms (Fourier-Motzkin
with strict-to-weak tightening) with equation substitution and partition
collapse, after normalizing everything.  It never guesses: a True result is
a proof within the rewrite fragment; False only means "fall through to the
randomized tier".
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Optional, Tuple

from .expr import (
    Expr,
    IntConst,
    Len,
    Poly,
    State,
    Sub,
    Var,
    VecRef,
    ac_equal,
    ac_key,
    evaluate,
    rewrite_refs,
    substitute,
    subterms,
)
from .normalize import expand, linsimp, normalize, rebuild_linear


@dataclass(frozen=True)
class Atom:
    pass


@dataclass(frozen=True)
class Eq(Atom):
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class Le(Atom):
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class Lt(Atom):
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class Ne(Atom):
    # Not part of the input grammar; used for division guards (x != 0).
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class Predicate:
    """Conjunction of atoms; the empty conjunction is TRUE."""

    atoms: Tuple[Atom, ...] = ()

    def __bool__(self):
        raise TypeError("use predicate_holds() to evaluate a Predicate")

    def conjoin(self, other: "Predicate") -> "Predicate":
        return Predicate(self.atoms + other.atoms)


TRUE = Predicate()


def pred(*atoms: Atom) -> Predicate:
    return Predicate(tuple(atoms))


def negate_atom(a: Atom) -> Atom:
    if isinstance(a, Lt):
        return Le(a.rhs, a.lhs)
    if isinstance(a, Le):
        return Lt(a.rhs, a.lhs)
    if isinstance(a, Eq):
        return Ne(a.lhs, a.rhs)
    if isinstance(a, Ne):
        return Eq(a.lhs, a.rhs)
    raise TypeError(f"cannot negate {a!r}")


def negate_guard(g: Predicate) -> Predicate:
    """Negate a single-atom guard predicate, pushing negation to the atom."""
    if len(g.atoms) != 1:
        raise ValueError("guards are single comparisons")
    return Predicate((negate_atom(g.atoms[0]),))


# ---------------------------------------------------------------------------
# Normalization of predicates


def _orient(cls, lhs: Expr, rhs: Expr) -> Atom:
    """Canonical comparison layout: negative linear items move left, positive
    ones right, so `0 <= k - 1` becomes `1 <= k`."""
    lin = linsimp(Sub(rhs, lhs))
    if lin is None:
        return cls(lhs, rhs)
    terms, const = lin
    neg = [(k, t, -c) for (k, t, c) in terms if c < 0]
    pos = [(k, t, c) for (k, t, c) in terms if c > 0]
    left = rebuild_linear(neg, -const if const < 0 else Fraction(0))
    right = rebuild_linear(pos, const if const > 0 else Fraction(0))
    return cls(left, right)


def normalize_atom(a: Atom) -> Optional[Atom]:
    """Normalize an atom; None means it is trivially true and can drop."""
    if isinstance(a, Eq):
        lhs, rhs = normalize(a.lhs), normalize(a.rhs)
        if ac_equal(lhs, rhs):
            return None
        return Eq(lhs, rhs)
    if isinstance(a, (Le, Lt)):
        lhs, rhs = normalize(a.lhs), normalize(a.rhs)
        lin = linsimp(Sub(rhs, lhs))
        if lin is not None:
            terms, const = lin
            if not terms:
                ok = const >= 0 if isinstance(a, Le) else const > 0
                if ok:
                    return None
                return type(a)(lhs, rhs)
        return _orient(type(a), lhs, rhs)
    if isinstance(a, Ne):
        lhs, rhs = normalize(a.lhs), normalize(a.rhs)
        if isinstance(lhs, IntConst) and isinstance(rhs, IntConst) and lhs.value != rhs.value:
            return None
        return Ne(lhs, rhs)
    raise TypeError(f"unknown atom {a!r}")


def normalize_pred(p: Predicate) -> Predicate:
    out = []
    seen = set()
    for a in p.atoms:
        na = normalize_atom(a)
        if na is None:
            continue
        key = atom_key(na)
        if key in seen:
            continue
        seen.add(key)
        out.append(na)
    return Predicate(tuple(out))


def atom_key(a: Atom):
    return (type(a).__name__, ac_key(a.lhs), ac_key(a.rhs))


def predicate_holds(p: Predicate, s: State) -> bool:
    """Evaluate the conjunction under a concrete state (exact arithmetic)."""
    for a in p.atoms:
        lhs = evaluate(a.lhs, s)
        rhs = evaluate(a.rhs, s)
        if isinstance(a, Eq):
            ok = lhs == rhs
        elif isinstance(a, Le):
            ok = lhs <= rhs
        elif isinstance(a, Lt):
            ok = lhs < rhs
        elif isinstance(a, Ne):
            ok = lhs != rhs
        else:
            raise TypeError(f"unknown atom {a!r}")
        if not ok:
            return False
    return True


def pred_free_names(p: Predicate) -> set:
    from .expr import array_names, free_vars

    names = set()
    for a in p.atoms:
        for side in (a.lhs, a.rhs):
            names |= free_vars(side)
            names |= array_names(side)
    return names


# ---------------------------------------------------------------------------
# Linear system (Fourier-Motzkin over exact rationals)
#
# Rows encode sum(coeff * term) + const <= 0.  All terms that reach this
# system are integer-valued (indices, sizes, segment lengths), which is what
# justifies tightening strict inequalities by one.


class LinearSystem:
    def __init__(self):
        self.rows = []
        self.terms = {}

    def _linearized(self, e: Expr):
        lin = linsimp(e)
        if lin is None:
            return None
        coeffs = {}
        for key, term, coeff in lin[0]:
            if isinstance(term, (Sub,)):
                return None
            if not isinstance(term, (Var, Len)):
                return None
            self.terms.setdefault(key, term)
            coeffs[key] = coeff
        return coeffs, lin[1]

    def add_le(self, lhs: Expr, rhs: Expr) -> bool:
        row = self._linearized(Sub(lhs, rhs))
        if row is None:
            return False
        self.rows.append(row)
        return True

    def add_lt(self, lhs: Expr, rhs: Expr) -> bool:
        row = self._linearized(Sub(lhs, rhs))
        if row is None:
            return False
        coeffs, const = row
        self.rows.append((coeffs, const + 1))
        return True

    def add_eq(self, lhs: Expr, rhs: Expr) -> bool:
        return self.add_le(lhs, rhs) and self.add_le(rhs, lhs)

    def add_atom(self, a: Atom) -> bool:
        if isinstance(a, Le):
            return self.add_le(a.lhs, a.rhs)
        if isinstance(a, Lt):
            return self.add_lt(a.lhs, a.rhs)
        if isinstance(a, Eq):
            return self.add_eq(a.lhs, a.rhs)
        return False

    def copy(self) -> "LinearSystem":
        out = LinearSystem()
        out.rows = [(dict(c), k) for c, k in self.rows]
        out.terms = dict(self.terms)
        return out

    def infeasible(self) -> bool:
        rows = [(dict(c), k) for c, k in self.rows]
        keys = sorted({k for c, _ in rows for k in c})
        for var in keys:
            pos, neg, rest = [], [], []
            for coeffs, const in rows:
                cv = coeffs.get(var, Fraction(0))
                if cv > 0:
                    pos.append((coeffs, const))
                elif cv < 0:
                    neg.append((coeffs, const))
                else:
                    rest.append((coeffs, const))
            new_rows = rest
            for pc, pk in pos:
                for nc, nk in neg:
                    scale_p = Fraction(1) / pc[var]
                    scale_n = Fraction(-1) / nc[var]
                    coeffs = {}
                    for key in set(pc) | set(nc):
                        if key == var:
                            continue
                        v = pc.get(key, Fraction(0)) * scale_p + nc.get(key, Fraction(0)) * scale_n
                        if v != 0:
                            coeffs[key] = v
                    const = pk * scale_p + nk * scale_n
                    new_rows.append((coeffs, const))
            rows = new_rows
        return any(const > 0 for coeffs, const in rows if not coeffs)

    def entails_le(self, lhs: Expr, rhs: Expr) -> bool:
        # system |= lhs <= rhs  iff  system + (lhs >= rhs + 1) infeasible
        trial = self.copy()
        if not trial.add_le(Sub(IntConst(0), Sub(lhs, rhs)), IntConst(-1)):
            return False
        return trial.infeasible()

    def entails_lt(self, lhs: Expr, rhs: Expr) -> bool:
        trial = self.copy()
        if not trial.add_le(Sub(rhs, lhs), IntConst(0)):
            return False
        return trial.infeasible()

    def entails_eq(self, lhs: Expr, rhs: Expr) -> bool:
        return self.entails_le(lhs, rhs) and self.entails_le(rhs, lhs)


def _partition_axioms(sys: LinearSystem, atoms) -> None:
    """Standing facts about segment lengths: nonnegativity and additivity."""
    vectors_two = set()
    vectors_three = set()
    lens = []
    for a in atoms:
        for side in (a.lhs, a.rhs):
            for t in subterms(side):
                if isinstance(t, Len):
                    lens.append(t)
                    if t.ref.part in ("T", "B"):
                        vectors_two.add(t.ref.vector)
                    elif t.ref.part in ("0", "2"):
                        vectors_three.add(t.ref.vector)
    for t in lens:
        sys.add_le(IntConst(0), t)
    for v in sorted(vectors_two):
        top, bottom, whole = Len(VecRef(v, "T")), Len(VecRef(v, "B")), Len(VecRef(v))
        sys.add_eq(whole, top + bottom)
        for t in (top, bottom, whole):
            sys.add_le(IntConst(0), t)
    for v in sorted(vectors_three):
        first, last, whole = Len(VecRef(v, "0")), Len(VecRef(v, "2")), Len(VecRef(v))
        sys.add_eq(whole, first + IntConst(1) + last)
        for t in (first, last, whole):
            sys.add_le(IntConst(0), t)


def _collapse_for(vector: str, side: str):
    """Ref rewriter for an empty side of a partitioned vector."""
    other = "B" if side == "T" else "T"

    def fn(node):
        if isinstance(node, Poly):
            if node.ref.vector == vector and node.ref.part == side:
                return IntConst(0)
            if node.ref.vector == vector and node.ref.part == other:
                return Poly(VecRef(vector), node.point)
        if isinstance(node, Len):
            if node.ref.vector == vector and node.ref.part == side:
                return IntConst(0)
            if node.ref.vector == vector and node.ref.part == other:
                return Len(VecRef(vector))
        return node

    return fn


def entail(p: Predicate, q: Predicate) -> bool:
    """Tier-1 implication: True only when every atom of `q` is syntactically
    entailed by `p` after normalization, linear index reasoning, equation
    substitution, and partition collapse."""
    p = normalize_pred(p)
    q = normalize_pred(q)
    if not q.atoms:
        return True

    sys = LinearSystem()
    _partition_axioms(sys, p.atoms + q.atoms)
    for a in p.atoms:
        sys.add_atom(a)
    if sys.infeasible():
        return True

    # Implied constants and aliases among linear terms (k = 0, len(a.T) = len(a), ...).
    const_bindings = []
    collapse_fns = []
    keys = sorted(sys.terms)
    for key in keys:
        term = sys.terms[key]
        if sys.entails_eq(term, IntConst(0)):
            if isinstance(term, Var):
                const_bindings.append((term.name, IntConst(0)))
            elif isinstance(term, Len) and term.ref.part in ("T", "B"):
                collapse_fns.append(_collapse_for(term.ref.vector, term.ref.part))
    for k1, k2 in combinations(keys, 2):
        t1, t2 = sys.terms[k1], sys.terms[k2]
        if sys.entails_eq(t1, t2):
            if isinstance(t1, Var) and isinstance(t2, Var):
                const_bindings.append((t1.name, t2))
            for ta, tb in ((t1, t2), (t2, t1)):
                if (
                    isinstance(ta, Len)
                    and isinstance(tb, Len)
                    and ta.ref.vector == tb.ref.vector
                    and ta.ref.part in ("T", "B")
                    and tb.ref.part is None
                ):
                    other = "B" if ta.ref.part == "T" else "T"
                    collapse_fns.append(_collapse_for(ta.ref.vector, other))

    def ground(e: Expr) -> Expr:
        if const_bindings:
            e = substitute(e, const_bindings)
        for fn in collapse_fns:
            e = rewrite_refs(e, fn)
        return normalize(e)

    # Equation atoms of p, oriented var -> expr, become rewrite rules.
    rules = []
    for a in p.atoms:
        if isinstance(a, Eq):
            lhs, rhs = ground(a.lhs), ground(a.rhs)
            if isinstance(lhs, Var):
                rules.append((lhs.name, rhs))
            elif isinstance(rhs, Var):
                rules.append((rhs.name, lhs))

    def proves_eq(lhs: Expr, rhs: Expr) -> bool:
        l = ground(lhs)
        r = ground(rhs)
        if rules:
            l = substitute(l, rules)
            r = substitute(r, rules)
        l = expand(normalize(l))
        r = expand(normalize(r))
        return ac_equal(l, r)

    for atom in q.atoms:
        if isinstance(atom, Eq):
            if proves_eq(atom.lhs, atom.rhs):
                continue
            if sys.entails_eq(atom.lhs, atom.rhs):
                continue
            return False
        if isinstance(atom, Le):
            if sys.entails_le(atom.lhs, atom.rhs):
                continue
            if ac_equal(ground(atom.lhs), ground(atom.rhs)):
                continue
            return False
        if isinstance(atom, Lt):
            if sys.entails_lt(atom.lhs, atom.rhs):
                continue
            return False
        if isinstance(atom, Ne):
            lhs, rhs = ground(atom.lhs), ground(atom.rhs)
            if isinstance(lhs, IntConst) and isinstance(rhs, IntConst) and lhs.value != rhs.value:
                continue
            if any(atom_key(atom) == atom_key(pa) for pa in p.atoms):
                continue
            return False
        return False
    return True
