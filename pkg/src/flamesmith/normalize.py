"""Algebraic normalization: bound peeling, factor extraction, power laws.

The rewrite strategy is a fixed, ordered list applied bottom-up to a
fixpoint: peel -> factor -> power -> fold.  The step budget converts an
accidental rewrite loop into a hard internal error instead of a hang.

Design notes that matter for soundness:

* Linear simplification (`linsimp`) runs only in integer index positions
  (summation bounds, exponents, array indices), never on general arithmetic,
  so value-level terms keep the shape their authors gave them.
* Peeling a summation bound is applied when the bound carries a constant
  offset, but only in the two shapes where the out-of-range dodge is
  airtight: the body must subscript an array with the bound variable itself,
  and either the upper bound is that array's declared size symbol (lower
  peel; declare via `declared_sizes`) or the lower bound is zero (upper
  peel).  At any state binding the size symbol to the vector's true length
  where the peeled range would have been empty, the peeled element then
  reads out of the array, so evaluation of the two forms is never
  defined-and-unequal.
* Same-base power factors inside a summation body are split/combined so that
  a factor free of the bound variable can leave the summation; outside
  summations, powers always combine.
"""

from __future__ import annotations

from contextlib import contextmanager
from contextvars import ContextVar
from fractions import Fraction

from .errors import NormalizeBudgetExceeded
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
    free_vars,
    substitute,
)

STEP_BUDGET = 10_000

# Which variable names a vector's size.  A lower-bound peel is justified only
# against the size symbol of the array the peeled element comes from; the
# expression alone cannot tell a size symbol from an index symbol, so the
# derivation entry points declare the binding for their operation spec.
_ARRAY_SIZES: ContextVar[dict] = ContextVar("flamesmith_array_sizes", default={})


@contextmanager
def declared_sizes(mapping: dict):
    """Scope the array -> size-symbol bindings for normalization."""
    token = _ARRAY_SIZES.set(dict(mapping))
    try:
        yield
    finally:
        _ARRAY_SIZES.reset(token)


def _size_symbol(array: str):
    return _ARRAY_SIZES.get().get(array)


# ---------------------------------------------------------------------------
# Linear forms over opaque integer-valued terms


def linsimp(e: Expr):
    """Decompose `e` as sum(coeff_i * term_i) + const with rational coeffs.

    Returns (terms, const) where `terms` is a list of (key, term, coeff) in
    first-appearance order, or None when `e` is not linear in that sense.
    """
    acc = {}
    order = []
    const = [Fraction(0)]

    def add(node, mult):
        if isinstance(node, IntConst):
            const[0] += mult * node.value
            return True
        if isinstance(node, Add):
            return add(node.lhs, mult) and add(node.rhs, mult)
        if isinstance(node, Sub):
            return add(node.lhs, mult) and add(node.rhs, -mult)
        if isinstance(node, Mul):
            if isinstance(node.lhs, IntConst):
                return add(node.rhs, mult * node.lhs.value)
            if isinstance(node.rhs, IntConst):
                return add(node.lhs, mult * node.rhs.value)
        if isinstance(node, (Var, Len, ArrayElem, Pow, Div, Sum, Poly, VecRef)):
            k = ac_key(node)
            if k not in acc:
                acc[k] = [node, Fraction(0)]
                order.append(k)
            acc[k][1] += mult
            return True
        return False

    if not add(e, Fraction(1)):
        return None
    terms = [(k, acc[k][0], acc[k][1]) for k in order if acc[k][1] != 0]
    return terms, const[0]


def rebuild_linear(terms, const) -> Expr:
    """Deterministic rebuild: terms in order (positives as +, negatives as -),
    integer constant last.  Falls back to a -1 coefficient when a negative
    term has nothing to subtract from.
    """

    def scaled(term, coeff):
        if coeff == 1:
            return term
        if coeff.denominator == 1:
            return Mul(IntConst(int(coeff)), term)
        return Div(Mul(IntConst(coeff.numerator), term), IntConst(coeff.denominator))

    acc = None
    for _, term, coeff in terms:
        if coeff > 0:
            piece = scaled(term, coeff)
            acc = piece if acc is None else Add(acc, piece)
        else:
            if acc is None:
                acc = scaled(term, coeff)
            else:
                acc = Sub(acc, scaled(term, -coeff))
    if acc is None:
        if const.denominator == 1:
            return IntConst(int(const))
        return Div(IntConst(const.numerator), IntConst(const.denominator))
    if const > 0:
        if const.denominator != 1:
            return Add(acc, Div(IntConst(const.numerator), IntConst(const.denominator)))
        return Add(acc, IntConst(int(const)))
    if const < 0:
        if const.denominator != 1:
            return Sub(acc, Div(IntConst(-const.numerator), IntConst(const.denominator)))
        return Sub(acc, IntConst(int(-const)))
    return acc


def linear_index_form(e: Expr) -> Expr:
    lin = linsimp(e)
    if lin is None:
        return e
    rebuilt = rebuild_linear(*lin)
    return rebuilt


def const_difference(a: Expr, b: Expr):
    """Integer c with a - b == c when that difference is constant, else None."""
    lin = linsimp(Sub(a, b))
    if lin is None:
        return None
    terms, const = lin
    if terms or const.denominator != 1:
        return None
    return int(const)


def split_const_offset(e: Expr):
    """Split `e` into (rest, c) with e == rest + c and c an integer; rest may
    be None when `e` is the constant itself."""
    lin = linsimp(e)
    if lin is None:
        return e, 0
    terms, const = lin
    if const.denominator != 1:
        return e, 0
    c = int(const)
    if not terms:
        return None, c
    return rebuild_linear(terms, Fraction(0)), c


# ---------------------------------------------------------------------------
# Rewrite pass


def _flatten_mul(e: Expr, out: list):
    if isinstance(e, Mul):
        _flatten_mul(e.lhs, out)
        _flatten_mul(e.rhs, out)
    else:
        out.append(e)


def _rebuild_mul(factors) -> Expr:
    if not factors:
        return IntConst(1)
    acc = factors[0]
    for f in factors[1:]:
        acc = Mul(acc, f)
    return acc


class _Normalizer:
    def __init__(self):
        self.steps = 0

    def spend(self):
        self.steps += 1
        if self.steps > STEP_BUDGET:
            raise NormalizeBudgetExceeded(f"exceeded {STEP_BUDGET} rewrite steps")

    # -- single bottom-up pass; returns (expr, changed)

    def visit(self, e: Expr, bound: frozenset):
        if isinstance(e, (IntConst, Var, VecRef)):
            return e, False
        if isinstance(e, ArrayElem):
            idx, ch = self.visit(e.index, bound)
            idx2 = linear_index_form(idx)
            if idx2 is not idx and not ac_equal(idx2, idx):
                ch = True
            out = ArrayElem(e.array, idx2)
            return out, ch
        if isinstance(e, Len):
            if e.ref.part == "1":
                self.spend()
                return IntConst(1), True
            return e, False
        if isinstance(e, Poly):
            pt, ch = self.visit(e.point, bound)
            if e.ref.part == "1":
                self.spend()
                return VecRef(e.ref.vector, "1"), True
            return Poly(e.ref, pt), ch
        if isinstance(e, Sum):
            return self.visit_sum(e, bound)
        if isinstance(e, (Add, Sub)):
            lhs, c1 = self.visit(e.lhs, bound)
            rhs, c2 = self.visit(e.rhs, bound)
            out, c3 = self.fold_addsub(type(e), lhs, rhs)
            return out, c1 or c2 or c3
        if isinstance(e, Mul):
            lhs, c1 = self.visit(e.lhs, bound)
            rhs, c2 = self.visit(e.rhs, bound)
            out, c3 = self.fold_mul(Mul(lhs, rhs), bound)
            return out, c1 or c2 or c3
        if isinstance(e, Div):
            lhs, c1 = self.visit(e.lhs, bound)
            rhs, c2 = self.visit(e.rhs, bound)
            out, c3 = self.fold_div(lhs, rhs)
            return out, c1 or c2 or c3
        if isinstance(e, Pow):
            base, c1 = self.visit(e.base, bound)
            exp, c2 = self.visit(e.exp, bound)
            out, c3 = self.fold_pow(base, exp)
            return out, c1 or c2 or c3
        raise TypeError(f"unknown expression node {e!r}")

    def fold_addsub(self, cls, lhs, rhs):
        if isinstance(lhs, IntConst) and isinstance(rhs, IntConst):
            self.spend()
            value = lhs.value + rhs.value if cls is Add else lhs.value - rhs.value
            return IntConst(value), True
        if isinstance(rhs, IntConst) and rhs.value == 0:
            self.spend()
            return lhs, True
        if cls is Add and isinstance(lhs, IntConst) and lhs.value == 0:
            self.spend()
            return rhs, True
        if cls is Sub and ac_equal(lhs, rhs):
            self.spend()
            return IntConst(0), True
        return cls(lhs, rhs), False

    def fold_mul(self, e: Mul, bound: frozenset):
        factors = []
        _flatten_mul(e, factors)
        coeff = 1
        rest = []
        for f in factors:
            if isinstance(f, IntConst):
                coeff *= f.value
            else:
                rest.append(f)
        if coeff == 0:
            self.spend()
            return IntConst(0), True
        changed = len(rest) + (0 if coeff == 1 else 1) != len(factors)

        combined = self.combine_powers(rest, bound)
        if combined is not None:
            rest = combined
            changed = True

        if not rest:
            self.spend()
            return IntConst(coeff), True
        out = _rebuild_mul(([IntConst(coeff)] if coeff != 1 else []) + rest)
        if changed:
            self.spend()
        return out, changed

    def combine_powers(self, factors, bound: frozenset):
        """Merge same-base power factors.  Inside a summation body, a factor
        whose exponent mentions the bound variable never merges with one that
        does not (that separation is what lets factors leave the sum)."""

        def as_pow(f):
            if isinstance(f, Pow):
                return f.base, f.exp
            return f, IntConst(1)

        def exp_class(exp):
            return bool(free_vars(exp) & bound)

        out = list(factors)
        for i in range(len(out)):
            if out[i] is None:
                continue
            for j in range(i + 1, len(out)):
                if out[j] is None:
                    continue
                b1, e1 = as_pow(out[i])
                b2, e2 = as_pow(out[j])
                if not ac_equal(b1, b2):
                    continue
                if isinstance(b1, (IntConst,)):
                    continue
                if bound and exp_class(e1) != exp_class(e2):
                    continue
                merged_exp = linear_index_form(Add(e1, e2))
                new, _ = self.fold_pow(b1, merged_exp)
                out[i] = new
                out[j] = None
        if any(f is None for f in out):
            return [f for f in out if f is not None]
        return None

    def fold_div(self, lhs, rhs):
        if isinstance(rhs, IntConst) and rhs.value == 1:
            self.spend()
            return lhs, True
        if (
            isinstance(lhs, IntConst)
            and isinstance(rhs, IntConst)
            and rhs.value != 0
            and lhs.value % rhs.value == 0
        ):
            self.spend()
            return IntConst(lhs.value // rhs.value), True
        return Div(lhs, rhs), False

    def fold_pow(self, base, exp):
        exp2 = linear_index_form(exp)
        changed = not ac_equal(exp2, exp)
        exp = exp2
        if isinstance(exp, IntConst):
            if exp.value == 0:
                self.spend()
                return IntConst(1), True
            if exp.value == 1:
                self.spend()
                return base, True
            if isinstance(base, IntConst) and exp.value > 0:
                self.spend()
                return IntConst(base.value ** exp.value), True
        if isinstance(base, IntConst) and base.value == 1:
            self.spend()
            return IntConst(1), True
        return Pow(base, exp), changed

    # -- summations

    def visit_sum(self, e: Sum, bound: frozenset):
        inner_bound = bound | {e.var}
        lo, c1 = self.visit(e.lo, bound)
        hi, c2 = self.visit(e.hi, bound)
        body, c3 = self.visit(e.body, inner_bound)
        lo2 = linear_index_form(lo)
        hi2 = linear_index_form(hi)
        changed = c1 or c2 or c3 or not ac_equal(lo2, lo) or not ac_equal(hi2, hi)
        lo, hi = lo2, hi2
        e = Sum(e.var, lo, hi, body)

        diff = const_difference(hi, lo)
        if diff is not None and diff <= 0:
            self.spend()
            return IntConst(0), True
        if diff == 1:
            self.spend()
            peeled, _ = self.visit(substitute(body, [(e.var, lo)]), bound)
            return peeled, True

        anchors = self.peel_anchors(e)
        if anchors:
            lo_rest, lo_off = split_const_offset(lo)
            hi_rest, hi_off = split_const_offset(hi)
            # Peeling is only applied where the peeled element is out of the
            # array exactly when the range was empty: a lower peel against
            # the declared size symbol of an anchoring array, or an upper
            # peel against a zero lower bound.
            lower_ok = (
                lo_off <= -1
                and isinstance(hi, Var)
                and any(_size_symbol(arr) == hi.name for arr in anchors)
            )
            if lower_ok:
                self.spend()
                head, _ = self.visit(substitute(body, [(e.var, lo)]), bound)
                rest = Sum(e.var, linear_index_form(Add(lo, IntConst(1))), hi, body)
                rest2, _ = self.visit(rest, bound)
                return Add(head, rest2), True
            if hi_off >= 1 and hi_rest is not None and lo == IntConst(0):
                self.spend()
                new_hi = linear_index_form(Sub(hi, IntConst(1)))
                tail, _ = self.visit(substitute(body, [(e.var, new_hi)]), bound)
                rest = Sum(e.var, lo, new_hi, body)
                rest2, _ = self.visit(rest, bound)
                return Add(rest2, tail), True

        out, ch = self.factor_sum(e, bound)
        return out, changed or ch

    def peel_anchors(self, e: Sum):
        # Peeling moves one element out of the range; it is safe only when
        # the body subscripts an array with the bound variable itself, so the
        # peeled copy reads out of range exactly where the range was empty.
        anchors = set()
        for t in _walk(e.body):
            if isinstance(t, ArrayElem) and t.index == Var(e.var):
                anchors.add(t.array)
        return anchors

    def factor_sum(self, e: Sum, bound: frozenset):
        factors = []
        _flatten_mul(e.body, factors)
        split = []
        changed = False
        for f in factors:
            if isinstance(f, Pow) and e.var not in free_vars(f.base):
                lin = linsimp(f.exp)
                if lin is not None:
                    terms, const = lin
                    dep = [t for (_, t, _) in terms if e.var in free_vars(t)]
                    if dep and const.denominator == 1 and int(const) >= 1:
                        var_part = rebuild_linear(terms, Fraction(0))
                        split.append(Pow(f.base, var_part))
                        cpart, _ = self.fold_pow(f.base, IntConst(int(const)))
                        split.append(cpart)
                        changed = True
                        continue
            split.append(f)
        inside = [f for f in split if e.var in free_vars(f)]
        outside = [f for f in split if e.var not in free_vars(f)]
        if outside and inside:
            self.spend()
            new_body = _rebuild_mul(inside)
            return _rebuild_mul([Sum(e.var, e.lo, e.hi, new_body)] + outside), True
        if changed:
            self.spend()
            return Sum(e.var, e.lo, e.hi, _rebuild_mul(split)), True
        return e, False


def _walk(e: Expr):
    yield e
    for c in children(e):
        yield from _walk(c)


def normalize(e: Expr) -> Expr:
    """Rewrite `e` to the canonical fixpoint form.  Idempotent."""
    norm = _Normalizer()
    current = e
    while True:
        nxt, changed = norm.visit(current, frozenset())
        if not changed:
            return nxt
        current = nxt


# ---------------------------------------------------------------------------
# Expansion (used for proof-side matching, not for display)


def expand(e: Expr) -> Expr:
    """Distribute products over sums of terms and merge same-base powers.

    Summation nodes are treated as atoms: their internal shape is what the
    matching machinery keys on.  The result is for comparison and template
    matching; display paths use `normalize` only.
    """
    e = _expand(e)
    return normalize(e)


def _expand(e: Expr) -> Expr:
    if isinstance(e, (IntConst, Var, VecRef, Len, Sum)):
        return e
    if isinstance(e, ArrayElem):
        return ArrayElem(e.array, _expand(e.index))
    if isinstance(e, Poly):
        return Poly(e.ref, _expand(e.point))
    if isinstance(e, Add):
        return Add(_expand(e.lhs), _expand(e.rhs))
    if isinstance(e, Sub):
        return Sub(_expand(e.lhs), _expand(e.rhs))
    if isinstance(e, Pow):
        return Pow(_expand(e.base), _expand(e.exp))
    if isinstance(e, Div):
        return Div(_expand(e.lhs), _expand(e.rhs))
    if isinstance(e, Mul):
        lhs = _expand(e.lhs)
        rhs = _expand(e.rhs)
        for side, other, flip in ((lhs, rhs, False), (rhs, lhs, True)):
            if isinstance(side, (Add, Sub)):
                cls = type(side)
                if flip:
                    return cls(_expand(Mul(other, side.lhs)), _expand(Mul(other, side.rhs)))
                return cls(_expand(Mul(side.lhs, other)), _expand(Mul(side.rhs, other)))
        return Mul(lhs, rhs)
    raise TypeError(f"unknown expression node {e!r}")
