"""The worksheet file format: versioned, line-oriented, round-trippable.

Worksheets are the central reviewable artifact, so the only persistence
format is human-readable text.  Every line is `key: value`; predicates and
expressions use the shared syntax from `specfile`; statements are either
simultaneous assignments (`y, k := 0, n`) or the partition bookkeeping
commands:

    partition a with a.B empty
    repartition a exposing a.1 from a.T
    merge a.1 into a.B

Sequences join pieces with ';'.
"""

from __future__ import annotations

from typing import List, Tuple

from .errors import WorksheetFormatError
from .expr import Expr
from .invariants import (
    FIRST_TO_LAST,
    FLAME,
    INDEXED,
    LAST_TO_FIRST,
    InvariantCandidate,
    OperationSpec,
    VarDecl,
)
from .predicate import Predicate
from .specfile import (
    ExprParser,
    parse_pred_text,
    render_expr,
    render_pred,
    tokenize,
    _parse_var,
)
from .worksheet import CostInstrumentation, GIVEN, Worksheet
from .wp import (
    MergeBack,
    PartitionInit,
    Repartition,
    SimAssign,
    Stmt,
    seq,
    seq_items,
)

HEADER = "flamesmith worksheet v1"


# ---------------------------------------------------------------------------
# Statements


def render_stmt(s: Stmt) -> str:
    pieces = []
    for item in seq_items(s):
        if isinstance(item, SimAssign):
            targets = ", ".join(item.targets)
            exprs = ", ".join(render_expr(e) for e in item.exprs)
            pieces.append(f"{targets} := {exprs}")
        elif isinstance(item, PartitionInit):
            pieces.append(f"partition {item.vector} with {item.vector}.{item.empty_side} empty")
        elif isinstance(item, Repartition):
            pieces.append(
                f"repartition {item.vector} exposing {item.vector}.1 from {item.vector}.{item.expose_from}"
            )
        elif isinstance(item, MergeBack):
            pieces.append(f"merge {item.vector}.1 into {item.vector}.{item.into}")
        else:
            raise WorksheetFormatError(f"cannot render statement {item!r}")
    return " ; ".join(pieces)


def parse_stmt_text(text: str, line: int = 1) -> Stmt:
    pieces = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        pieces.append(_parse_stmt_piece(chunk, line))
    if not pieces:
        raise WorksheetFormatError(f"line {line}: empty statement")
    return seq(*pieces)


def _parse_stmt_piece(text: str, line: int) -> Stmt:
    words = text.split()
    if words[0] == "partition":
        # partition <vec> with <vec>.<side> empty
        if len(words) != 5 or words[2] != "with" or words[4] != "empty":
            raise WorksheetFormatError(f"line {line}: bad partition: {text!r}")
        return PartitionInit(words[1], empty_side=_part_of(words[3], line))
    if words[0] == "repartition":
        if len(words) != 6 or words[2] != "exposing" or words[4] != "from":
            raise WorksheetFormatError(f"line {line}: bad repartition: {text!r}")
        vec = words[1]
        source = _part_of(words[5], line)
        return Repartition(vec, expose_from=source)
    if words[0] == "merge":
        if len(words) != 4 or words[2] != "into":
            raise WorksheetFormatError(f"line {line}: bad merge: {text!r}")
        vec = words[1].split(".")[0]
        return MergeBack(vec, into=_part_of(words[3], line))
    if ":=" in text:
        lhs, rhs = text.split(":=", 1)
        targets = tuple(t.strip() for t in lhs.split(","))
        exprs = _parse_expr_list(rhs.strip(), line)
        if len(targets) != len(exprs):
            raise WorksheetFormatError(
                f"line {line}: {len(targets)} targets but {len(exprs)} expressions"
            )
        return SimAssign(targets, tuple(exprs))
    raise WorksheetFormatError(f"line {line}: unrecognized statement: {text!r}")


def _part_of(ref_text: str, line: int) -> str:
    if "." not in ref_text:
        raise WorksheetFormatError(f"line {line}: expected a segment path, got {ref_text!r}")
    part = ref_text.split(".", 1)[1]
    if part not in ("T", "B", "0", "1", "2"):
        raise WorksheetFormatError(f"line {line}: bad segment part {part!r}")
    return part


def _parse_expr_list(text: str, line: int) -> List[Expr]:
    parser = ExprParser(tokenize(text, line))
    exprs = [parser.expr()]
    while parser.peek().text == ",":
        parser.next()
        exprs.append(parser.expr())
    tok = parser.peek()
    if tok.kind != "eof":
        raise WorksheetFormatError(f"line {line}: trailing tokens after expression list")
    return exprs


# ---------------------------------------------------------------------------
# Whole worksheets


def save_worksheet(w: Worksheet) -> str:
    if not w.filled():
        raise WorksheetFormatError("cannot save a worksheet with unfilled slots")
    lines = [HEADER]
    lines.append(f"op: {w.spec.name}")
    lines.append(f"mode: {w.mode}")
    lines.append(f"invariant-id: {w.candidate.cid}")
    lines.append(f"invariant-label: {w.candidate.label}")
    lines.append(f"direction: {w.candidate.direction}")
    for d in w.spec.decls:
        kind = d.kind if d.kind == "scalar" else f"vector({d.size})"
        lines.append(f"decl: {d.name} : {kind}, {d.role}")
    for name, expr in w.candidate.auxiliaries:
        lines.append(f"aux: {name} := {render_expr(expr)}")
    lines.append(f"spec-pre: {render_pred(w.spec.pre)}")
    lines.append(f"spec-post: {render_pred(w.spec.post)}")
    lines.append(f"requires: {render_pred(w.requires)}")
    for note in w.notes:
        lines.append(f"note: {note}")
    if w.provenance:
        items = ",".join(f"{k}={v}" for k, v in sorted(w.provenance.items()))
        lines.append(f"provenance: {items}")
    lines.append(f"step-1a: {render_pred(w.pre)}")
    lines.append(f"step-4a: {render_pred(w.init_wp)}")
    lines.append(f"step-4b: {render_stmt(w.init)}")
    lines.append(f"step-2: {render_pred(w.candidate.predicate)}")
    lines.append(f"step-3: {render_pred(w.guard)}")
    lines.append(f"step-7: {render_pred(w.step7)}")
    lines.append(f"step-8: {render_stmt(w.update)}")
    lines.append(f"step-6: {render_pred(w.step6)}")
    if w.mode == INDEXED:
        lines.append(f"step-5: {render_stmt(w.index_update)}")
    else:
        lines.append(f"step-5a: {render_stmt(w.repartition)}")
        lines.append(f"step-5b: {render_stmt(w.merge)}")
    lines.append(f"step-1b: {render_pred(w.post)}")
    if w.cost is not None:
        lines.append(f"cost-counter: {w.cost.counter}")
        if w.cost.increment is not None:
            lines.append(f"cost-increment: {w.cost.increment}")
            lines.append(f"cost-invariant: {render_pred(Predicate((w.cost.invariant_atom,)))}")
            lines.append(f"cost-processed: {render_expr(w.cost.processed)}")
            lines.append(f"cost-total: {render_expr(w.cost.total)}")
        lines.append(f"cost-expr: {render_expr(w.cost.increment_expr)}")
    return "\n".join(lines) + "\n"


def load_worksheet(text: str) -> Worksheet:
    lines = text.splitlines()
    if not lines or lines[0].strip() != HEADER:
        raise WorksheetFormatError(
            f"missing or unsupported header; expected {HEADER!r}"
        )
    fields = {}
    decls: List[VarDecl] = []
    auxes: List[Tuple[str, Expr]] = []
    notes: List[str] = []
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if ":" not in line:
            raise WorksheetFormatError(f"line {lineno}: expected 'key: value'")
        key, value = line.split(":", 1)
        key = key.strip()
        value = value.strip()
        if key == "decl":
            decls.append(_parse_var(f"var {value}", lineno))
        elif key == "aux":
            if ":=" not in value:
                raise WorksheetFormatError(f"line {lineno}: aux needs 'name := expr'")
            name, expr_text = value.split(":=", 1)
            from .specfile import parse_expr_text

            auxes.append((name.strip(), parse_expr_text(expr_text.strip(), lineno)))
        elif key == "note":
            notes.append(value)
        else:
            if key in fields:
                raise WorksheetFormatError(f"line {lineno}: duplicate key {key!r}")
            fields[key] = (value, lineno)
    return _assemble(fields, decls, auxes, notes)


def _need(fields, key):
    if key not in fields:
        raise WorksheetFormatError(f"missing required field {key!r}")
    return fields[key]


def _assemble(fields, decls, auxes, notes) -> Worksheet:
    name, _ = _need(fields, "op")
    mode, mode_line = _need(fields, "mode")
    if mode not in (INDEXED, FLAME):
        raise WorksheetFormatError(f"line {mode_line}: unknown mode {mode!r}")
    direction, dir_line = _need(fields, "direction")
    if direction not in (FIRST_TO_LAST, LAST_TO_FIRST):
        raise WorksheetFormatError(f"line {dir_line}: unknown direction {direction!r}")
    cid_text, cid_line = _need(fields, "invariant-id")
    try:
        cid = int(cid_text)
    except ValueError:
        raise WorksheetFormatError(f"line {cid_line}: invariant-id must be an integer")
    label = fields.get("invariant-label", ("", 0))[0]

    def get_pred(key) -> Predicate:
        value, line = _need(fields, key)
        return parse_pred_text(value, line)

    def get_stmt(key) -> Stmt:
        value, line = _need(fields, key)
        return parse_stmt_text(value, line)

    spec = OperationSpec(
        name,
        tuple(decls),
        get_pred("spec-pre"),
        get_pred("spec-post"),
    )
    spec.validate()

    candidate = InvariantCandidate(
        cid=cid,
        mode=mode,
        label=label,
        predicate=get_pred("step-2"),
        auxiliaries=tuple(auxes),
        direction=direction,
        valid=True,
    )
    w = Worksheet(
        mode=mode,
        spec=spec,
        candidate=candidate,
        pre=get_pred("step-1a"),
        post=get_pred("step-1b"),
        guard=get_pred("step-3"),
        init=get_stmt("step-4b"),
        init_wp=get_pred("step-4a"),
        step6=get_pred("step-6"),
        step7=get_pred("step-7"),
        requires=get_pred("requires"),
        notes=tuple(notes),
    )
    update = get_stmt("step-8")
    if not isinstance(update, SimAssign):
        raise WorksheetFormatError("step-8 must be a simultaneous assignment")
    w.update = update
    if mode == INDEXED:
        step5 = get_stmt("step-5")
        if not isinstance(step5, SimAssign):
            raise WorksheetFormatError("step-5 must be the index update assignment")
        w.index_update = step5
    else:
        rep = get_stmt("step-5a")
        mrg = get_stmt("step-5b")
        if not isinstance(rep, Repartition) or not isinstance(mrg, MergeBack):
            raise WorksheetFormatError("steps 5a/5b must be repartition and merge")
        w.repartition = rep
        w.merge = mrg

    if "provenance" in fields:
        value, _ = fields["provenance"]
        prov = {}
        for item in value.split(","):
            if "=" in item:
                slot, tag = item.split("=", 1)
                prov[slot.strip()] = tag.strip()
        w.provenance = prov
    else:
        w.provenance = {slot: GIVEN for slot in ("1a", "1b", "2", "3", "4a", "4b", "5", "6", "7", "8")}

    if "cost-counter" in fields:
        counter, _ = fields["cost-counter"]
        if "cost-increment" in fields:
            inc_text, inc_line = fields["cost-increment"]
            try:
                increment = int(inc_text)
            except ValueError:
                raise WorksheetFormatError(f"line {inc_line}: cost-increment must be an integer")
            inv_pred = get_pred("cost-invariant")
            if len(inv_pred.atoms) != 1:
                raise WorksheetFormatError("cost-invariant must be a single equation")
            from .specfile import parse_expr_text

            processed = parse_expr_text(_need(fields, "cost-processed")[0])
            total = parse_expr_text(_need(fields, "cost-total")[0])
            expr_text = fields.get("cost-expr", (str(increment), 0))[0]
            w.cost = CostInstrumentation(
                counter=counter,
                increment=increment,
                increment_expr=parse_expr_text(expr_text),
                invariant_atom=inv_pred.atoms[0],
                processed=processed,
                total=total,
            )
        else:
            from .specfile import parse_expr_text

            expr_text = _need(fields, "cost-expr")[0]
            w.cost = CostInstrumentation(
                counter=counter,
                increment=None,
                increment_expr=parse_expr_text(expr_text),
                invariant_atom=None,
                processed=None,
                total=None,
            )
    return w
