"""FastAPI service wrapping the derivation pipeline.

Every endpoint is a pure function of its request body (plus the seed), so
the service is safe for any number of concurrent clients.  Malformed spec or
worksheet text maps to 400; a derivation that cannot complete maps to 422; a
falsified obligation is a result, not an error, and arrives with status 200
and ok=false.
"""

from __future__ import annotations

import random
from fractions import Fraction

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..checking import DEFAULT_SEED, DEFAULT_TRIALS
from ..cost import instrument, prove_cost, recurrence_of, solve_recurrence
from ..errors import (
    CostInvariantFalsified,
    DerivationError,
    EvalError,
    FlamesmithError,
    InputError,
    InvariantViolation,
    UnsupportedRecurrence,
)
from ..interpreter import make_input_state, oracle, run
from ..invariants import FLAME, INDEXED, enumerate_invariants
from ..render import render_latex, render_markdown, render_text
from ..specfile import parse_spec, render_expr, render_pred
from ..wksfile import load_worksheet, render_stmt, save_worksheet
from ..worksheet import derive, verify
from .models import (
    CandidateModel,
    CostRequest,
    CostResponse,
    DeriveAllRequest,
    DeriveAllResponse,
    DerivedRow,
    DeriveRequest,
    InvariantsResponse,
    ObligationModel,
    RenderRequest,
    RenderResponse,
    RunRequest,
    RunResponse,
    SpecRequest,
    VerifyRequest,
    VerifyResponse,
    WorksheetResponse,
)

app = FastAPI(
    title="flamesmith",
    version=__version__,
    description="Derives provably correct reduction loops from pre/postcondition specs.",
)


def _spec_of(text: str):
    try:
        return parse_spec(text)
    except InputError as err:
        raise HTTPException(status_code=400, detail={"kind": "input", "message": str(err)})


def _worksheet_of(text: str):
    try:
        return load_worksheet(text)
    except InputError as err:
        raise HTTPException(status_code=400, detail={"kind": "input", "message": str(err)})


def _obligation_models(obligations):
    from ..cli import format_state

    out = []
    for o in obligations:
        out.append(
            ObligationModel(
                name=o.name,
                description=o.description,
                verdict=o.verdict.kind,
                tier=o.verdict.tier,
                reason=o.verdict.reason,
                counterexample=(
                    format_state(o.verdict.counterexample)
                    if o.verdict.counterexample is not None
                    else None
                ),
            )
        )
    return out


@app.get("/healthz")
def healthz():
    return {"status": "ok", "version": __version__}


@app.post("/invariants", response_model=InvariantsResponse)
def invariants_endpoint(req: SpecRequest):
    spec = _spec_of(req.spec)
    try:
        candidates = enumerate_invariants(spec, req.mode)
    except DerivationError as err:
        raise HTTPException(status_code=422, detail={"kind": "derivation", "message": str(err)})
    return InvariantsResponse(
        op=spec.name,
        mode=req.mode,
        candidates=[
            CandidateModel(
                id=c.cid,
                valid=c.valid,
                direction=c.direction,
                label=c.label,
                predicate=render_pred(c.predicate),
                reason=c.reason,
                notes=list(c.repairs),
            )
            for c in candidates
        ],
    )


@app.post("/derive", response_model=WorksheetResponse)
def derive_endpoint(req: DeriveRequest):
    spec = _spec_of(req.spec)
    seed = req.seed if req.seed is not None else DEFAULT_SEED
    trials = req.trials if req.trials is not None else DEFAULT_TRIALS
    try:
        w = derive(spec, req.invariant_id, req.mode, trials=trials, seed=seed)
    except DerivationError as err:
        raise HTTPException(status_code=422, detail={"kind": "derivation", "message": str(err)})
    return WorksheetResponse(
        worksheet=save_worksheet(w),
        complete=w.complete(),
        notes=list(w.notes),
        obligations=_obligation_models(w.obligations),
    )


@app.post("/verify", response_model=VerifyResponse)
def verify_endpoint(req: VerifyRequest):
    w = _worksheet_of(req.worksheet)
    seed = req.seed if req.seed is not None else DEFAULT_SEED
    trials = req.trials if req.trials is not None else DEFAULT_TRIALS
    try:
        obligations = verify(w, trials=trials, seed=seed)
    except FlamesmithError as err:
        raise HTTPException(status_code=400, detail={"kind": "input", "message": str(err)})
    return VerifyResponse(
        op=w.spec.name,
        invariant_id=w.candidate.cid,
        mode=w.mode,
        ok=all(o.verdict.ok for o in obligations),
        obligations=_obligation_models(obligations),
    )


@app.post("/run", response_model=RunResponse)
def run_endpoint(req: RunRequest):
    w = _worksheet_of(req.worksheet)
    try:
        coeffs = [Fraction(c) for c in req.coeffs]
        point = Fraction(req.x)
    except (ValueError, ZeroDivisionError) as err:
        raise HTTPException(status_code=400, detail={"kind": "input", "message": str(err)})
    state = make_input_state(w, coeffs, point)
    try:
        result = run(w, state, check_invariants=req.check_invariants)
    except InvariantViolation as err:
        raise HTTPException(
            status_code=422,
            detail={"kind": "invariant-violation", "message": str(err)},
        )
    except EvalError as err:
        raise HTTPException(status_code=422, detail={"kind": "evaluation", "message": str(err)})
    trace = None
    if req.trace:
        trace = [{k: str(v) for k, v in snap.items()} for snap in result.iterations]
    return RunResponse(
        output=w.output_name(),
        result=str(result.result),
        iterations=len(result.iterations),
        trace=trace,
    )


@app.post("/cost", response_model=CostResponse)
def cost_endpoint(req: CostRequest):
    w = _worksheet_of(req.worksheet)
    seed = req.seed if req.seed is not None else DEFAULT_SEED
    trials = req.trials if req.trials is not None else DEFAULT_TRIALS
    if w.cost is None:
        w = instrument(w)
    try:
        report = prove_cost(w, trials=trials, seed=seed, max_n=req.max_n)
    except UnsupportedRecurrence as err:
        raise HTTPException(status_code=422, detail={"kind": "recurrence", "message": str(err)})
    except CostInvariantFalsified as err:
        raise HTTPException(status_code=422, detail={"kind": "cost-falsified", "message": str(err)})
    return CostResponse(
        increment=report.increment,
        recurrence=report.recurrence.describe(),
        closed_form=render_expr(report.closed_form) if report.closed_form is not None else None,
        cost_invariant=(
            render_pred(report.cost_invariant) if report.cost_invariant is not None else None
        ),
        total_cost=render_expr(report.total_cost) if report.total_cost is not None else None,
        obligations=_obligation_models(report.obligations),
        runtime_counts=[[n, c] for n, c in report.runtime_counts],
        runtime_ok=report.runtime_ok,
    )


@app.post("/render", response_model=RenderResponse)
def render_endpoint(req: RenderRequest):
    w = _worksheet_of(req.worksheet)
    renderer = {"text": render_text, "latex": render_latex, "markdown": render_markdown}
    return RenderResponse(rendered=renderer[req.format](w))


@app.post("/derive-all", response_model=DeriveAllResponse)
def derive_all_endpoint(req: DeriveAllRequest):
    spec = _spec_of(req.spec)
    seed = req.seed if req.seed is not None else DEFAULT_SEED
    trials = req.trials if req.trials is not None else DEFAULT_TRIALS
    modes = [INDEXED, FLAME] if req.mode == "both" else [req.mode]
    rows = []
    ok = True
    for mode in modes:
        try:
            candidates = enumerate_invariants(spec, mode)
        except DerivationError as err:
            raise HTTPException(status_code=422, detail={"kind": "derivation", "message": str(err)})
        for c in candidates:
            if not c.valid:
                continue
            try:
                w = derive(spec, c.cid, mode, trials=trials, seed=seed)
            except DerivationError as err:
                raise HTTPException(
                    status_code=422,
                    detail={"kind": "derivation", "message": f"invariant {c.cid} ({mode}): {err}"},
                )
            mismatches = _oracle_mismatches(w, req.oracle_checks, seed)
            ok = ok and w.complete() and mismatches == 0
            rows.append(
                DerivedRow(
                    mode=mode,
                    invariant_id=c.cid,
                    guard=render_pred(w.guard),
                    update=render_stmt(w.update),
                    cost_closed_form=_closed_form(w),
                    oracle_mismatches=mismatches,
                )
            )
    return DeriveAllResponse(op=spec.name, rows=rows, oracle_checks=req.oracle_checks, ok=ok)


def _closed_form(w):
    wi = instrument(w)
    if wi.cost.increment is None:
        return None
    try:
        return render_expr(solve_recurrence(recurrence_of(wi)))
    except UnsupportedRecurrence:
        return None


def _oracle_mismatches(w, count: int, seed: int) -> int:
    from ..predicate import Ne

    rng = random.Random(seed ^ 0x0AC1E)
    needs_nonzero = any(isinstance(a, Ne) for a in w.requires.atoms)
    bad = 0
    for _ in range(count):
        n = rng.randint(0, 8)
        coeffs = [rng.randint(-5, 5) for _ in range(n)]
        while True:
            x = rng.randint(-3, 3)
            if x != 0 or not needs_nonzero:
                break
        result = run(w, make_input_state(w, coeffs, Fraction(x)))
        if result.result != oracle(coeffs, x):
            bad += 1
    return bad
