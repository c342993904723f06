"""The operation-spec input format, plus the shared expression syntax.

Line-oriented, '#' comments:

    op polyeval
    var y : scalar, out
    var a : vector(n), in
    var x : scalar, in
    var k : scalar, index
    pre: 0 <= n
    post: y = sum(i, 0, n-1, a[i] * x^i)

Summation bounds are INCLUSIVE in this syntax; the conversion to the
internal exclusive upper bound happens exactly once, here.  The same
expression grammar also covers segment paths (`a.T`, `a.B`, `a.0`...),
`pi(ref, x)` for the polynomial over a segment, and `m(ref)` for its length,
so worksheet files can reuse this parser.
"""

from __future__ import annotations

import re
from typing import List, Optional, Tuple

from .errors import ParseError, SemanticError
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
)
from .invariants import OperationSpec, VarDecl
from .normalize import linear_index_form
from .predicate import Eq, Le, Lt, Ne, Predicate, TRUE

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>\#[^\n]*)
  | (?P<int>\d+)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*(\.(T|B|0|1|2))?)
  | (?P<op><=|!=|&&|:=|->|[-+*/^()\[\],:=<])
    """,
    re.VERBOSE,
)


class Token:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind, text, line, col):
        self.kind = kind
        self.text = text
        self.line = line
        self.col = col

    def __repr__(self):
        return f"Token({self.kind}, {self.text!r}, {self.line}:{self.col})"


def tokenize(text: str, line_offset: int = 1) -> List[Token]:
    tokens = []
    line = line_offset
    col = 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(line, col, "a token", text[pos])
        kind = m.lastgroup
        raw = m.group(0)
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, raw, line, col))
        newlines = raw.count("\n")
        if newlines:
            line += newlines
            col = len(raw) - raw.rfind("\n")
        else:
            col += len(raw)
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


class ExprParser:
    """Recursive descent over the shared expression / predicate grammar."""

    def __init__(self, tokens: List[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, text: str) -> Token:
        tok = self.peek()
        if tok.text != text:
            raise ParseError(tok.line, tok.col, repr(text), tok.text or "end of input")
        return self.next()

    def at_end(self) -> bool:
        return self.peek().kind == "eof"

    # -- predicates

    def predicate(self) -> Predicate:
        if self.peek().text == "true":
            self.next()
            return TRUE
        atoms = [self.comparison()]
        while self.peek().text == "&&":
            self.next()
            atoms.append(self.comparison())
        return Predicate(tuple(atoms))

    def comparison(self):
        lhs = self.expr()
        tok = self.peek()
        ops = {"=": Eq, "<=": Le, "<": Lt, "!=": Ne}
        if tok.text in ops:
            self.next()
            rhs = self.expr()
            return ops[tok.text](lhs, rhs)
        raise ParseError(tok.line, tok.col, "a comparison operator", tok.text or "end of input")

    # -- expressions

    def expr(self) -> Expr:
        e = self.term()
        while self.peek().text in ("+", "-"):
            op = self.next().text
            rhs = self.term()
            e = Add(e, rhs) if op == "+" else Sub(e, rhs)
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.peek().text in ("*", "/"):
            op = self.next().text
            rhs = self.unary()
            e = Mul(e, rhs) if op == "*" else Div(e, rhs)
        return e

    def unary(self) -> Expr:
        if self.peek().text == "-":
            tok = self.next()
            inner = self.unary()
            if isinstance(inner, IntConst):
                return IntConst(-inner.value)
            return Sub(IntConst(0), inner)
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek().text == "^":
            self.next()
            exp = self.power_operand()
            return Pow(base, exp)
        return base

    def power_operand(self) -> Expr:
        # Exponents are atoms or parenthesized expressions: x^(i-k), x^i, x^2.
        if self.peek().text == "(":
            self.next()
            e = self.expr()
            self.expect(")")
            return e
        return self.atom()

    def atom(self) -> Expr:
        tok = self.peek()
        if tok.kind == "int":
            self.next()
            return IntConst(int(tok.text))
        if tok.text == "(":
            self.next()
            e = self.expr()
            self.expect(")")
            return e
        if tok.kind == "name":
            self.next()
            if tok.text == "sum" and self.peek().text == "(":
                return self.sum_call(tok)
            if tok.text == "pi" and self.peek().text == "(":
                return self.pi_call()
            if tok.text == "m" and self.peek().text == "(":
                return self.len_call()
            if "." in tok.text:
                vec, part = tok.text.split(".")
                return VecRef(vec, part)
            if self.peek().text == "[":
                self.next()
                idx = self.expr()
                self.expect("]")
                return ArrayElem(tok.text, idx)
            return Var(tok.text)
        raise ParseError(tok.line, tok.col, "an expression", tok.text or "end of input")

    def sum_call(self, tok: Token) -> Expr:
        self.expect("(")
        var = self.peek()
        if var.kind != "name" or "." in var.text:
            raise ParseError(var.line, var.col, "a summation variable", var.text)
        self.next()
        self.expect(",")
        lo = self.expr()
        self.expect(",")
        hi = self.expr()
        self.expect(",")
        body = self.expr()
        self.expect(")")
        # Inclusive upper bound in the syntax, exclusive internally.
        return Sum(var.text, lo, linear_index_form(Add(hi, IntConst(1))), body)

    def vec_ref(self) -> VecRef:
        tok = self.peek()
        if tok.kind != "name":
            raise ParseError(tok.line, tok.col, "a vector reference", tok.text)
        self.next()
        if "." in tok.text:
            vec, part = tok.text.split(".")
            return VecRef(vec, part)
        return VecRef(tok.text)

    def pi_call(self) -> Expr:
        self.expect("(")
        ref = self.vec_ref()
        self.expect(",")
        point = self.expr()
        self.expect(")")
        return Poly(ref, point)

    def len_call(self) -> Expr:
        self.expect("(")
        ref = self.vec_ref()
        self.expect(")")
        return Len(ref)


def parse_expr_text(text: str, line: int = 1) -> Expr:
    parser = ExprParser(tokenize(text, line))
    e = parser.expr()
    tok = parser.peek()
    if tok.kind != "eof":
        raise ParseError(tok.line, tok.col, "end of expression", tok.text)
    return e


def parse_pred_text(text: str, line: int = 1) -> Predicate:
    parser = ExprParser(tokenize(text, line))
    p = parser.predicate()
    tok = parser.peek()
    if tok.kind != "eof":
        raise ParseError(tok.line, tok.col, "end of predicate", tok.text)
    return p


# ---------------------------------------------------------------------------
# Spec files


def parse_spec(text: str) -> OperationSpec:
    """Parse and validate an operation spec; positions in errors are
    1-based."""
    name = None
    decls: List[VarDecl] = []
    pre = TRUE
    post: Optional[Predicate] = None
    saw_pre = saw_post = False

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("op "):
            name = line[3:].strip()
            if not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", name):
                raise ParseError(lineno, 4, "an identifier", name)
        elif line.startswith("var "):
            decls.append(_parse_var(line, lineno))
        elif line.startswith("pre:"):
            pre = parse_pred_text(line[4:].strip(), lineno)
            saw_pre = True
        elif line.startswith("post:"):
            post = parse_pred_text(line[5:].strip(), lineno)
            saw_post = True
        else:
            raise ParseError(lineno, 1, "'op', 'var', 'pre:' or 'post:'", line.split()[0])

    if name is None:
        raise SemanticError("missing 'op' line")
    if not saw_post or post is None:
        raise SemanticError("missing 'post:' line")
    spec = OperationSpec(name, tuple(decls), pre, post)
    spec.validate()
    return spec


_VAR_RE = re.compile(
    r"var\s+([A-Za-z_][A-Za-z_0-9]*)\s*:\s*"
    r"(scalar|vector\s*\(\s*([A-Za-z_][A-Za-z_0-9]*)\s*\))\s*,\s*"
    r"(in|out|index|aux)\s*$"
)


def _parse_var(line: str, lineno: int) -> VarDecl:
    m = _VAR_RE.match(line)
    if m is None:
        raise ParseError(lineno, 1, "var <name> : scalar|vector(<size>), in|out|index|aux", line)
    name, kind, size, role = m.group(1), m.group(2), m.group(3), m.group(4)
    if kind.startswith("vector"):
        return VarDecl(name, "vector", role, size=size)
    return VarDecl(name, "scalar", role)


# ---------------------------------------------------------------------------
# Rendering back to the shared syntax (round-trips through the parser)

_PREC_CMP, _PREC_ADD, _PREC_MUL, _PREC_UNARY, _PREC_POW, _PREC_ATOM = range(6)


def render_expr(e: Expr, prec: int = 0) -> str:
    text, my_prec = _render(e)
    if my_prec < prec:
        return f"({text})"
    return text


def _render(e: Expr) -> Tuple[str, int]:
    if isinstance(e, IntConst):
        if e.value < 0:
            return str(e.value), _PREC_UNARY
        return str(e.value), _PREC_ATOM
    if isinstance(e, Var):
        return e.name, _PREC_ATOM
    if isinstance(e, ArrayElem):
        return f"{e.array}[{render_expr(e.index)}]", _PREC_ATOM
    if isinstance(e, VecRef):
        return e.label(), _PREC_ATOM
    if isinstance(e, Len):
        return f"m({e.ref.label()})", _PREC_ATOM
    if isinstance(e, Poly):
        return f"pi({e.ref.label()}, {render_expr(e.point)})", _PREC_ATOM
    if isinstance(e, Sum):
        hi = linear_index_form(Sub(e.hi, IntConst(1)))
        return (
            f"sum({e.var}, {render_expr(e.lo)}, {render_expr(hi)}, {render_expr(e.body)})",
            _PREC_ATOM,
        )
    if isinstance(e, Add):
        return (
            f"{render_expr(e.lhs, _PREC_ADD)} + {render_expr(e.rhs, _PREC_ADD + 1)}",
            _PREC_ADD,
        )
    if isinstance(e, Sub):
        return (
            f"{render_expr(e.lhs, _PREC_ADD)} - {render_expr(e.rhs, _PREC_ADD + 1)}",
            _PREC_ADD,
        )
    if isinstance(e, Mul):
        return (
            f"{render_expr(e.lhs, _PREC_MUL)} * {render_expr(e.rhs, _PREC_MUL + 1)}",
            _PREC_MUL,
        )
    if isinstance(e, Div):
        return (
            f"{render_expr(e.lhs, _PREC_MUL)} / {render_expr(e.rhs, _PREC_MUL + 1)}",
            _PREC_MUL,
        )
    if isinstance(e, Pow):
        base = render_expr(e.base, _PREC_ATOM)
        exp_text, exp_prec = _render(e.exp)
        if exp_prec < _PREC_ATOM:
            exp_text = f"({exp_text})"
        return f"{base}^{exp_text}", _PREC_POW
    raise TypeError(f"unknown expression node {e!r}")


_ATOM_OPS = {"Eq": "=", "Le": "<=", "Lt": "<", "Ne": "!="}


def render_atom(a) -> str:
    op = _ATOM_OPS[type(a).__name__]
    return f"{render_expr(a.lhs)} {op} {render_expr(a.rhs)}"


def render_pred(p: Predicate) -> str:
    if not p.atoms:
        return "true"
    return " && ".join(render_atom(a) for a in p.atoms)


def render_spec(spec: OperationSpec) -> str:
    lines = [f"op {spec.name}"]
    for d in spec.decls:
        kind = d.kind if d.kind == "scalar" else f"vector({d.size})"
        lines.append(f"var {d.name} : {kind}, {d.role}")
    lines.append(f"pre: {render_pred(spec.pre)}")
    lines.append(f"post: {render_pred(spec.post)}")
    return "\n".join(lines) + "\n"
