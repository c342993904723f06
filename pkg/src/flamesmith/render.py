"""Pretty worksheet rendering: fixed-width text, LaTeX, and Markdown.

The layout mirrors the derivation worksheets: assertions in braces between
the commands they bracket, with the step number that produced each row in
the left column.  In partitioned mode the scalars display under their
customary Greek names (the output as psi, the evaluation point as chi, the
exposed element as alpha_1); worksheet files always keep the plain names.
"""

from __future__ import annotations

import re
from typing import List, Tuple

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
from .invariants import FLAME, INDEXED
from .normalize import linear_index_form
from .predicate import Predicate
from .specfile import render_pred
from .wksfile import render_stmt
from .worksheet import Worksheet

GREEK = {"psi": "ψ", "chi": "χ", "alpha": "α", "pi": "π"}


def _flame_name_map(w: Worksheet) -> dict:
    mapping = {w.spec.output(): GREEK["psi"]}
    inputs = w.spec.scalar_inputs()
    if inputs:
        mapping[inputs[0]] = GREEK["chi"]
    return mapping


def _greekify(text: str, w: Worksheet) -> str:
    vec = w.spec.vector().name
    for part in ("T", "B", "0", "2"):
        text = text.replace(f"{vec}.{part}", f"{vec}_{part}")
    text = text.replace(f"{vec}.1", f"{GREEK['alpha']}_1")
    text = re.sub(r"\bpi\(", f"{GREEK['pi']}(", text)
    for name, glyph in _flame_name_map(w).items():
        text = re.sub(rf"\b{re.escape(name)}\b", glyph, text)
    return text


def _hole_display_map(w: Worksheet) -> dict:
    # Partitioned worksheets show step 7 as the required state, not as a
    # hole equation: the hole names map back to their targets.
    targets = (w.spec.output(),) + w.candidate.aux_names()
    holes = ("E",) + tuple(f"E_{name}" for name in w.candidate.aux_names())
    return dict(zip(holes, targets))


def _subst_names(p: Predicate, mapping: dict) -> Predicate:
    from .expr import substitute

    bindings = [(old, Var(new)) for old, new in mapping.items()]
    atoms = tuple(
        type(a)(substitute(a.lhs, bindings), substitute(a.rhs, bindings))
        for a in p.atoms
    )
    return Predicate(atoms)


ASSERT, COMMAND, KEYWORD = "assert", "command", "keyword"


def worksheet_rows(w: Worksheet) -> List[Tuple[str, str, str]]:
    """(step label, row kind, rendered content) in worksheet order."""
    inv = render_pred(w.candidate.predicate)
    guard = render_pred(w.guard)
    rows = [
        ("1a", ASSERT, render_pred(w.pre)),
        ("4a", ASSERT, render_pred(w.init_wp)),
        ("4b", COMMAND, render_stmt(w.full_init())),
        ("2", ASSERT, inv),
        ("3", KEYWORD, f"while {guard} do"),
        ("2,3", ASSERT, f"{inv} && {guard}"),
    ]
    if w.mode == INDEXED:
        rows += [
            ("7", ASSERT, render_pred(w.step7)),
            ("8", COMMAND, render_stmt(w.update)),
            ("6", ASSERT, render_pred(w.step6)),
            ("5", COMMAND, render_stmt(w.index_update)),
        ]
    else:
        step7_state = _subst_names(w.step7, _hole_display_map(w))
        rows += [
            ("5a", COMMAND, render_stmt(w.repartition)),
            ("6", ASSERT, render_pred(w.step6)),
            ("8", COMMAND, render_stmt(w.update)),
            ("7", ASSERT, render_pred(step7_state)),
            ("5b", COMMAND, render_stmt(w.merge)),
        ]
    if w.counted():
        rows.append(("", COMMAND, f"{w.cost.counter} := {w.cost.counter} + {w.cost.increment}"))
    rows += [
        ("2", ASSERT, inv),
        ("", KEYWORD, "endwhile"),
        ("2,!3", ASSERT, render_pred(w.exit_assertion())),
        ("1b", ASSERT, render_pred(w.post)),
    ]
    return rows


def _title(w: Worksheet) -> str:
    return f"{w.spec.name}, invariant {w.candidate.cid}, {w.mode} mode"


def render_text(w: Worksheet) -> str:
    rows = worksheet_rows(w)
    out = [f"Worksheet: {_title(w)}"]
    if w.notes:
        for note in w.notes:
            out.append(f"note: {note}")
    out.append("")
    width = max(len(label) for label, _, _ in rows)
    for label, kind, content in rows:
        if w.mode == FLAME:
            content = _greekify(content, w)
        prefix = label.rjust(width)
        if kind == ASSERT:
            out.append(f"{prefix} | {{ {content} }}")
        elif kind == KEYWORD:
            out.append(f"{prefix} | {content}")
        else:
            out.append(f"{prefix} |     {content}")
    return "\n".join(out) + "\n"


def render_markdown(w: Worksheet) -> str:
    rows = worksheet_rows(w)
    out = [f"### Worksheet: {_title(w)}", ""]
    for note in w.notes:
        out.append(f"> {note}")
    if w.notes:
        out.append("")
    out.append("| Step | Annotation / command |")
    out.append("| --- | --- |")
    for label, kind, content in rows:
        if w.mode == FLAME:
            content = _greekify(content, w)
        shown = f"{{ {content} }}" if kind == ASSERT else content
        out.append(f"| {label} | `{shown}` |")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# LaTeX


def latex_expr(e: Expr, names: dict) -> str:
    return _ltx(e, names, 0)


_L_CMP, _L_ADD, _L_MUL, _L_POW, _L_ATOM = range(5)


def _wrap(text: str, prec: int, need: int) -> str:
    return f"\\left( {text} \\right)" if prec < need else text


def _ltx(e: Expr, names: dict, prec: int) -> str:
    if isinstance(e, IntConst):
        return str(e.value)
    if isinstance(e, Var):
        return names.get(e.name, e.name)
    if isinstance(e, ArrayElem):
        return f"{e.array}_{{{_ltx(e.index, names, 0)}}}"
    if isinstance(e, VecRef):
        if e.part is None:
            return e.vector
        if e.part == "1":
            return f"\\alpha_1"
        return f"{e.vector}_{{{e.part}}}"
    if isinstance(e, Len):
        return f"m({_ltx(e.ref, names, 0)})"
    if isinstance(e, Poly):
        return f"\\pi({_ltx(e.ref, names, 0)}, {_ltx(e.point, names, 0)})"
    if isinstance(e, Sum):
        hi = linear_index_form(Sub(e.hi, IntConst(1)))
        body = _ltx(e.body, names, _L_MUL)
        return _wrap(
            f"\\sum_{{{e.var}={_ltx(e.lo, names, 0)}}}^{{{_ltx(hi, names, 0)}}} {body}",
            _L_ADD, prec,
        )
    if isinstance(e, Add):
        return _wrap(f"{_ltx(e.lhs, names, _L_ADD)} + {_ltx(e.rhs, names, _L_ADD + 1)}", _L_ADD, prec)
    if isinstance(e, Sub):
        return _wrap(f"{_ltx(e.lhs, names, _L_ADD)} - {_ltx(e.rhs, names, _L_ADD + 1)}", _L_ADD, prec)
    if isinstance(e, Mul):
        return _wrap(
            f"{_ltx(e.lhs, names, _L_MUL)} \\times {_ltx(e.rhs, names, _L_MUL + 1)}", _L_MUL, prec
        )
    if isinstance(e, Div):
        return f"\\frac{{{_ltx(e.lhs, names, 0)}}}{{{_ltx(e.rhs, names, 0)}}}"
    if isinstance(e, Pow):
        base = _ltx(e.base, names, _L_ATOM)
        return f"{base}^{{{_ltx(e.exp, names, 0)}}}"
    raise TypeError(f"unknown expression node {e!r}")


_L_OPS = {"Eq": "=", "Le": "\\le", "Lt": "<", "Ne": "\\ne"}


def latex_pred(p: Predicate, names: dict) -> str:
    if not p.atoms:
        return "T"
    parts = [
        f"{_ltx(a.lhs, names, 0)} {_L_OPS[type(a).__name__]} {_ltx(a.rhs, names, 0)}"
        for a in p.atoms
    ]
    return " \\wedge ".join(parts)


def _latex_names(w: Worksheet) -> dict:
    names = {"E": "\\mathcal{E}", "E0": "\\mathcal{E}_0", "E1": "\\mathcal{E}_1", "E2": "\\mathcal{E}_2"}
    for aux in w.candidate.aux_names():
        names[f"E_{aux}"] = f"\\mathcal{{E}}_{{{aux}}}"
    if w.mode == FLAME:
        names[w.spec.output()] = "\\psi"
        inputs = w.spec.scalar_inputs()
        if inputs:
            names[inputs[0]] = "\\chi"
    return names


def _latex_stmt(stmt, names: dict) -> str:
    from .wp import MergeBack, PartitionInit, Repartition, SimAssign, seq_items

    pieces = []
    for item in seq_items(stmt):
        if isinstance(item, SimAssign):
            targets = ", ".join(names.get(t, t) for t in item.targets)
            exprs = ", ".join(_ltx(e, names, 0) for e in item.exprs)
            pieces.append(f"{targets} := {exprs}")
        elif isinstance(item, PartitionInit):
            v = item.vector
            pieces.append(
                f"{v} \\rightarrow \\binom{{{v}_T}}{{{v}_B}} \\text{{ with }} {v}_{item.empty_side} \\text{{ empty}}"
            )
        elif isinstance(item, Repartition):
            v = item.vector
            pieces.append(
                f"\\binom{{{v}_T}}{{{v}_B}} \\rightarrow ({v}_0; \\alpha_1; {v}_2)"
                f" \\text{{ exposing }} \\alpha_1 \\text{{ from }} {v}_{item.expose_from}"
            )
        elif isinstance(item, MergeBack):
            v = item.vector
            pieces.append(
                f"\\binom{{{v}_T}}{{{v}_B}} \\leftarrow ({v}_0; \\alpha_1; {v}_2)"
                f" \\text{{ absorbing }} \\alpha_1 \\text{{ into }} {v}_{item.into}"
            )
    return " ;\\ ".join(pieces)


def render_latex(w: Worksheet) -> str:
    names = _latex_names(w)
    inv = latex_pred(w.candidate.predicate, names)
    guard = latex_pred(w.guard, names)
    body_rows = []

    def assert_row(label, pred_text):
        body_rows.append((label, f"$\\{{\\, {pred_text} \\,\\}}$"))

    def command_row(label, stmt_text):
        body_rows.append((label, f"\\quad $ {stmt_text} $"))

    assert_row("1a", latex_pred(w.pre, names))
    assert_row("4a", latex_pred(w.init_wp, names))
    command_row("4b", _latex_stmt(w.full_init(), names))
    assert_row("2", inv)
    body_rows.append(("3", f"{{\\bf while }} ${guard}$ {{\\bf do}}"))
    assert_row("2,3", f"{inv} \\wedge {guard}")
    if w.mode == INDEXED:
        assert_row("7", latex_pred(w.step7, names))
        command_row("8", _latex_stmt(w.update, names))
        assert_row("6", latex_pred(w.step6, names))
        command_row("5", _latex_stmt(w.index_update, names))
    else:
        command_row("5a", _latex_stmt(w.repartition, names))
        assert_row("6", latex_pred(w.step6, names))
        command_row("8", _latex_stmt(w.update, names))
        assert_row("7", latex_pred(_subst_names(w.step7, _hole_display_map(w)), names))
        command_row("5b", _latex_stmt(w.merge, names))
    if w.counted():
        command_row("", f"{w.cost.counter} := {w.cost.counter} + {w.cost.increment}")
    assert_row("2", inv)
    body_rows.append(("", "{\\bf endwhile}"))
    assert_row("2,$\\neg$3", latex_pred(w.exit_assertion(), names))
    assert_row("1b", latex_pred(w.post, names))

    lines = [
        "\\documentclass{article}",
        "\\usepackage{amsmath}",
        "\\usepackage[margin=1in]{geometry}",
        "\\begin{document}",
        f"\\section*{{Worksheet: {_title(w)}}}",
    ]
    for note in w.notes:
        lines.append(f"\\noindent {_latex_escape(note)}\\par")
    lines += [
        "\\begin{tabular}{|c|l|}",
        "\\hline",
        "Step & Annotation / command \\\\",
        "\\hline",
    ]
    for label, content in body_rows:
        lines.append(f"{label} & {content} \\\\")
    lines += [
        "\\hline",
        "\\end{tabular}",
        "\\end{document}",
    ]
    return "\n".join(lines) + "\n"


def _latex_escape(text: str) -> str:
    for char in "&%$#_{}":
        text = text.replace(char, "\\" + char)
    return text
