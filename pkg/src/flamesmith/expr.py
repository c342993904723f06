"""Symbolic expression trees and their exact evaluation.

Expressions are immutable dataclass trees over exact rational arithmetic
(`fractions.Fraction`); no floating point anywhere.  Summation bounds are
inclusive-lower / exclusive-upper internally, which keeps the splitting and
peeling rules free of off-by-one adjustments; the input format and renderers
convert to and from the inclusive style people write.

Vector segments are addressed by `VecRef` paths: the whole vector, its
top/bottom halves under a split cursor (``a.T`` / ``a.B``), or the three-way
view while one element is exposed (``a.0`` / ``a.1`` / ``a.2``).  ``a.1``
always has exactly one element and may be used as a scalar.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional

from .errors import (
    DivisionByZero,
    IndexOutOfRange,
    UnboundVariable,
    UnresolvedSegment,
    VectorAsScalar,
)

Rat = Fraction

PART_NAMES = ("T", "B", "0", "1", "2")


def as_expr(value) -> "Expr":
    if isinstance(value, Expr):
        return value
    if isinstance(value, int):
        return IntConst(value)
    raise TypeError(f"cannot coerce {value!r} to an expression")


@dataclass(frozen=True)
class Expr:
    """Base node.  Arithmetic operators build trees, never compute."""

    def __add__(self, other):
        return Add(self, as_expr(other))

    def __radd__(self, other):
        return Add(as_expr(other), self)

    def __sub__(self, other):
        return Sub(self, as_expr(other))

    def __rsub__(self, other):
        return Sub(as_expr(other), self)

    def __mul__(self, other):
        return Mul(self, as_expr(other))

    def __rmul__(self, other):
        return Mul(as_expr(other), self)

    def __truediv__(self, other):
        return Div(self, as_expr(other))

    def __pow__(self, other):
        return Pow(self, as_expr(other))


@dataclass(frozen=True)
class IntConst(Expr):
    value: int


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class ArrayElem(Expr):
    array: str
    index: Expr


@dataclass(frozen=True)
class Sum(Expr):
    """Sum of `body` for `var` in [lo, hi).  Empty range is exactly 0."""

    var: str
    lo: Expr
    hi: Expr
    body: Expr


@dataclass(frozen=True)
class Add(Expr):
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class Sub(Expr):
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class Mul(Expr):
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class Div(Expr):
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exp: Expr


@dataclass(frozen=True)
class VecRef(Expr):
    """Path into a named vector.  part None means the whole vector."""

    vector: str
    part: Optional[str] = None

    def __post_init__(self):
        if self.part is not None and self.part not in PART_NAMES:
            raise ValueError(f"bad vector part {self.part!r}")

    def label(self) -> str:
        return self.vector if self.part is None else f"{self.vector}.{self.part}"


@dataclass(frozen=True)
class Len(Expr):
    ref: VecRef


@dataclass(frozen=True)
class Poly(Expr):
    """Polynomial with coefficients from the referenced segment at `point`."""

    ref: VecRef
    point: Expr


ZERO = IntConst(0)
ONE = IntConst(1)


# ---------------------------------------------------------------------------
# Concrete states


@dataclass
class State:
    """Concrete binding of scalars and vectors, plus partition cursors.

    ``splits[v] = s`` means v.T covers elements [0, s) and v.B covers
    [s, len).  While an element is exposed, ``exposed[v] = (p, q)`` gives the
    three-way view v.0 = [0, p), v.1 = [p, q), v.2 = [q, len) with q = p + 1.
    Treated as immutable by all symbolic code; the interpreter copies before
    stepping.
    """

    scalars: dict = field(default_factory=dict)
    vectors: dict = field(default_factory=dict)
    splits: dict = field(default_factory=dict)
    exposed: dict = field(default_factory=dict)

    def copy(self) -> "State":
        return State(
            scalars=dict(self.scalars),
            vectors=dict(self.vectors),
            splits=dict(self.splits),
            exposed=dict(self.exposed),
        )

    def segment(self, ref: VecRef):
        """Resolve a path to (start, stop) offsets into the vector."""
        if ref.vector not in self.vectors:
            raise UnboundVariable(ref.vector)
        length = len(self.vectors[ref.vector])
        part = ref.part
        if part is None:
            return 0, length
        if part in ("T", "B"):
            if ref.vector not in self.splits:
                raise UnresolvedSegment(ref.label())
            s = self.splits[ref.vector]
            return (0, s) if part == "T" else (s, length)
        if ref.vector not in self.exposed:
            raise UnresolvedSegment(ref.label())
        p, q = self.exposed[ref.vector]
        if part == "0":
            return 0, p
        if part == "1":
            return p, q
        return q, length

    def segment_values(self, ref: VecRef):
        start, stop = self.segment(ref)
        return self.vectors[ref.vector][start:stop]


def evaluate(e: Expr, s: State, env: Optional[dict] = None) -> Rat:
    """Exact big-step evaluation of `e` under state `s`.

    `env` overlays bound summation variables.  Raises the documented
    evaluation errors; never returns a float.
    """
    if env is None:
        env = {}
    return _eval(e, s, env)


def _eval(e: Expr, s: State, env: dict) -> Rat:
    if isinstance(e, IntConst):
        return Rat(e.value)
    if isinstance(e, Var):
        if e.name in env:
            return env[e.name]
        if e.name in s.scalars:
            return s.scalars[e.name]
        raise UnboundVariable(e.name)
    if isinstance(e, ArrayElem):
        if e.array not in s.vectors:
            raise UnboundVariable(e.array)
        idx = _eval(e.index, s, env)
        if idx.denominator != 1:
            raise IndexOutOfRange(e.array, idx)
        i = int(idx)
        vec = s.vectors[e.array]
        if not 0 <= i < len(vec):
            raise IndexOutOfRange(e.array, i)
        return vec[i]
    if isinstance(e, Sum):
        lo = _eval(e.lo, s, env)
        hi = _eval(e.hi, s, env)
        if lo.denominator != 1 or hi.denominator != 1:
            raise IndexOutOfRange(e.var, lo if lo.denominator != 1 else hi)
        total = Rat(0)
        inner = dict(env)
        for i in range(int(lo), int(hi)):
            inner[e.var] = Rat(i)
            total += _eval(e.body, s, inner)
        return total
    if isinstance(e, Add):
        return _eval(e.lhs, s, env) + _eval(e.rhs, s, env)
    if isinstance(e, Sub):
        return _eval(e.lhs, s, env) - _eval(e.rhs, s, env)
    if isinstance(e, Mul):
        return _eval(e.lhs, s, env) * _eval(e.rhs, s, env)
    if isinstance(e, Div):
        denom = _eval(e.rhs, s, env)
        if denom == 0:
            raise DivisionByZero()
        return _eval(e.lhs, s, env) / denom
    if isinstance(e, Pow):
        exp = _eval(e.exp, s, env)
        if exp.denominator != 1:
            raise IndexOutOfRange("^", exp)
        base = _eval(e.base, s, env)
        n = int(exp)
        if n < 0 and base == 0:
            raise DivisionByZero()
        # 0^0 is 1 here: empty products suit polynomial evaluation.
        return base ** n
    if isinstance(e, Len):
        start, stop = s.segment(e.ref)
        return Rat(stop - start)
    if isinstance(e, Poly):
        coeffs = s.segment_values(e.ref)
        point = _eval(e.point, s, env)
        total = Rat(0)
        power = Rat(1)
        for c in coeffs:
            total += c * power
            power *= point
        return total
    if isinstance(e, VecRef):
        values = s.segment_values(e)
        if len(values) != 1:
            raise VectorAsScalar(e.label())
        return values[0]
    raise TypeError(f"unknown expression node {e!r}")


# ---------------------------------------------------------------------------
# Traversal helpers


def children(e: Expr):
    if isinstance(e, (IntConst, Var, VecRef)):
        return ()
    if isinstance(e, ArrayElem):
        return (e.index,)
    if isinstance(e, Sum):
        return (e.lo, e.hi, e.body)
    if isinstance(e, (Add, Sub, Mul, Div)):
        return (e.lhs, e.rhs)
    if isinstance(e, Pow):
        return (e.base, e.exp)
    if isinstance(e, Len):
        return (e.ref,)
    if isinstance(e, Poly):
        return (e.ref, e.point)
    raise TypeError(f"unknown expression node {e!r}")


def subterms(e: Expr) -> Iterator[Expr]:
    yield e
    for c in children(e):
        yield from subterms(c)


def free_vars(e: Expr) -> set:
    """Free scalar variable names (summation-bound names excluded)."""
    out = set()

    def walk(node, bound):
        if isinstance(node, Var):
            if node.name not in bound:
                out.add(node.name)
            return
        if isinstance(node, Sum):
            walk(node.lo, bound)
            walk(node.hi, bound)
            walk(node.body, bound | {node.var})
            return
        for c in children(node):
            walk(c, bound)

    walk(e, frozenset())
    return out


def array_names(e: Expr) -> set:
    out = set()
    for t in subterms(e):
        if isinstance(t, ArrayElem):
            out.add(t.array)
        elif isinstance(t, VecRef):
            out.add(t.vector)
    return out


def mentions_var(e: Expr, name: str) -> bool:
    return name in free_vars(e)


def contains_sum_or_poly(e: Expr) -> bool:
    return any(isinstance(t, (Sum, Poly)) for t in subterms(e))


# ---------------------------------------------------------------------------
# Substitution

_FRESH_SEP = "_"


def _fresh_name(base: str, taken: set) -> str:
    i = 1
    while f"{base}{_FRESH_SEP}{i}" in taken:
        i += 1
    return f"{base}{_FRESH_SEP}{i}"


def substitute(e: Expr, bindings) -> Expr:
    """Simultaneously replace free variables per `bindings`.

    `bindings` is a sequence of (name, Expr) pairs; every replacement is
    interpreted in the pre-substitution context, so later pairs never see
    earlier replacements.  Summation binders shadow, and are renamed when a
    replacement would otherwise capture their variable.
    """
    mapping = {}
    for name, repl in bindings:
        mapping[name] = as_expr(repl)
    return _subst(e, mapping)


def _subst(e: Expr, mapping: dict) -> Expr:
    if not mapping:
        return e
    if isinstance(e, Var):
        return mapping.get(e.name, e)
    if isinstance(e, IntConst) or isinstance(e, VecRef):
        return e
    if isinstance(e, Sum):
        inner = {k: v for k, v in mapping.items() if k != e.var}
        lo = _subst(e.lo, mapping)
        hi = _subst(e.hi, mapping)
        var, body = e.var, e.body
        if inner and any(e.var in free_vars(v) for v in inner.values()):
            taken = free_vars(body) | {e.var}
            for v in inner.values():
                taken |= free_vars(v)
            var = _fresh_name(e.var, taken)
            body = _subst(body, {e.var: Var(var)})
        return Sum(var, lo, hi, _subst(body, inner))
    if isinstance(e, ArrayElem):
        return ArrayElem(e.array, _subst(e.index, mapping))
    if isinstance(e, Add):
        return Add(_subst(e.lhs, mapping), _subst(e.rhs, mapping))
    if isinstance(e, Sub):
        return Sub(_subst(e.lhs, mapping), _subst(e.rhs, mapping))
    if isinstance(e, Mul):
        return Mul(_subst(e.lhs, mapping), _subst(e.rhs, mapping))
    if isinstance(e, Div):
        return Div(_subst(e.lhs, mapping), _subst(e.rhs, mapping))
    if isinstance(e, Pow):
        return Pow(_subst(e.base, mapping), _subst(e.exp, mapping))
    if isinstance(e, Len):
        return e
    if isinstance(e, Poly):
        return Poly(e.ref, _subst(e.point, mapping))
    raise TypeError(f"unknown expression node {e!r}")


def rewrite_refs(e: Expr, fn) -> Expr:
    """Rebuild `e` with every Len/Poly/scalar-VecRef node passed through `fn`.

    `fn` receives the node and returns a replacement expression (possibly the
    node itself).  Used by the partition-step semantics, which rename segment
    paths without computing anything.
    """
    if isinstance(e, (Len, Poly, VecRef)):
        out = fn(e)
        if out is not e and isinstance(out, Expr):
            return out
        if isinstance(e, Poly):
            return Poly(e.ref, rewrite_refs(e.point, fn))
        return e
    if isinstance(e, (IntConst, Var)):
        return e
    if isinstance(e, ArrayElem):
        return ArrayElem(e.array, rewrite_refs(e.index, fn))
    if isinstance(e, Sum):
        return Sum(e.var, rewrite_refs(e.lo, fn), rewrite_refs(e.hi, fn), rewrite_refs(e.body, fn))
    if isinstance(e, Add):
        return Add(rewrite_refs(e.lhs, fn), rewrite_refs(e.rhs, fn))
    if isinstance(e, Sub):
        return Sub(rewrite_refs(e.lhs, fn), rewrite_refs(e.rhs, fn))
    if isinstance(e, Mul):
        return Mul(rewrite_refs(e.lhs, fn), rewrite_refs(e.rhs, fn))
    if isinstance(e, Div):
        return Div(rewrite_refs(e.lhs, fn), rewrite_refs(e.rhs, fn))
    if isinstance(e, Pow):
        return Pow(rewrite_refs(e.base, fn), rewrite_refs(e.exp, fn))
    raise TypeError(f"unknown expression node {e!r}")


def replace_subterm(e: Expr, old_key, replacement: Expr, key_fn) -> Expr:
    """Replace every subterm whose key equals `old_key` with `replacement`.

    `key_fn` computes comparison keys (normally `ac_key`), so matching is
    order-insensitive for commutative operators.
    """
    if key_fn(e) == old_key:
        return replacement
    if isinstance(e, (IntConst, Var, VecRef, Len)):
        return e
    if isinstance(e, ArrayElem):
        return ArrayElem(e.array, replace_subterm(e.index, old_key, replacement, key_fn))
    if isinstance(e, Sum):
        return Sum(
            e.var,
            replace_subterm(e.lo, old_key, replacement, key_fn),
            replace_subterm(e.hi, old_key, replacement, key_fn),
            replace_subterm(e.body, old_key, replacement, key_fn),
        )
    if isinstance(e, Add):
        return Add(replace_subterm(e.lhs, old_key, replacement, key_fn),
                   replace_subterm(e.rhs, old_key, replacement, key_fn))
    if isinstance(e, Sub):
        return Sub(replace_subterm(e.lhs, old_key, replacement, key_fn),
                   replace_subterm(e.rhs, old_key, replacement, key_fn))
    if isinstance(e, Mul):
        return Mul(replace_subterm(e.lhs, old_key, replacement, key_fn),
                   replace_subterm(e.rhs, old_key, replacement, key_fn))
    if isinstance(e, Div):
        return Div(replace_subterm(e.lhs, old_key, replacement, key_fn),
                   replace_subterm(e.rhs, old_key, replacement, key_fn))
    if isinstance(e, Pow):
        return Pow(replace_subterm(e.base, old_key, replacement, key_fn),
                   replace_subterm(e.exp, old_key, replacement, key_fn))
    if isinstance(e, Poly):
        return Poly(e.ref, replace_subterm(e.point, old_key, replacement, key_fn))
    raise TypeError(f"unknown expression node {e!r}")


# ---------------------------------------------------------------------------
# Structural comparison modulo commutativity and bound-variable names


def ac_key(e: Expr):
    """Comparison key: flattens +/* chains, sorts their operands, and
    canonicalizes summation binder names.  Two expressions with equal keys
    denote the same value up to commutativity/associativity of + and *.
    """
    return _ac_key(e, {})


def _ac_key(e: Expr, bound: dict):
    if isinstance(e, IntConst):
        return ("int", e.value)
    if isinstance(e, Var):
        if e.name in bound:
            return ("bvar", bound[e.name])
        return ("var", e.name)
    if isinstance(e, ArrayElem):
        return ("elem", e.array, _ac_key(e.index, bound))
    if isinstance(e, Sum):
        inner = dict(bound)
        inner[e.var] = len(bound)
        return ("sum", _ac_key(e.lo, bound), _ac_key(e.hi, bound), _ac_key(e.body, inner))
    if isinstance(e, (Add, Sub)):
        terms = []
        _collect_add(e, 1, terms, bound)
        return ("add", tuple(sorted(terms)))
    if isinstance(e, Mul):
        factors = []
        _collect_mul(e, factors, bound)
        return ("mul", tuple(sorted(factors)))
    if isinstance(e, Div):
        return ("div", _ac_key(e.lhs, bound), _ac_key(e.rhs, bound))
    if isinstance(e, Pow):
        return ("pow", _ac_key(e.base, bound), _ac_key(e.exp, bound))
    if isinstance(e, VecRef):
        return ("ref", e.vector, e.part or "")
    if isinstance(e, Len):
        return ("len", e.ref.vector, e.ref.part or "")
    if isinstance(e, Poly):
        return ("poly", e.ref.vector, e.ref.part or "", _ac_key(e.point, bound))
    raise TypeError(f"unknown expression node {e!r}")


def _collect_add(e: Expr, sign: int, out: list, bound: dict):
    if isinstance(e, Add):
        _collect_add(e.lhs, sign, out, bound)
        _collect_add(e.rhs, sign, out, bound)
    elif isinstance(e, Sub):
        _collect_add(e.lhs, sign, out, bound)
        _collect_add(e.rhs, -sign, out, bound)
    else:
        out.append((sign, _ac_key(e, bound)))


def _collect_mul(e: Expr, out: list, bound: dict):
    if isinstance(e, Mul):
        _collect_mul(e.lhs, out, bound)
        _collect_mul(e.rhs, out, bound)
    else:
        out.append(_ac_key(e, bound))


def ac_equal(e1: Expr, e2: Expr) -> bool:
    return ac_key(e1) == ac_key(e2)
