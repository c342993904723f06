"""Command-line surface.  A thin layer: parse arguments, call the library,
format results.  All diagnostics go to stderr; results go to stdout; output
is byte-identical for identical inputs and seed.

Exit codes: 0 success / all obligations hold; 1 a falsified obligation or an
oracle mismatch; 2 unparseable or ill-formed input; 3 derivation failure.
"""

from __future__ import annotations

import os
import random
import sys
from fractions import Fraction

import click

from .checking import DEFAULT_SEED, DEFAULT_TRIALS
from .cost import instrument, prove_cost, recurrence_of, solve_recurrence
from .errors import (
    DerivationError,
    EvalError,
    FlamesmithError,
    InputError,
    InvariantViolation,
    UnsupportedRecurrence,
)
from .expr import State
from .interpreter import make_input_state, oracle, run
from .invariants import FLAME, INDEXED, enumerate_invariants
from .render import render_latex, render_markdown, render_text
from .specfile import parse_spec, render_pred
from .wksfile import load_worksheet, save_worksheet
from .worksheet import derive, verify

EXIT_OK = 0
EXIT_FALSIFIED = 1
EXIT_INPUT = 2
EXIT_DERIVATION = 3

ENV_SEED = "FLAMESMITH_SEED"


def resolve_seed(seed):
    if seed is not None:
        return seed
    env = os.environ.get(ENV_SEED)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise click.UsageError(f"{ENV_SEED} must be an integer, got {env!r}")
    return DEFAULT_SEED


def _read(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return handle.read()
    except OSError as err:
        click.echo(f"error: {err}", err=True)
        sys.exit(EXIT_INPUT)


def _load_spec(path: str):
    try:
        return parse_spec(_read(path))
    except InputError as err:
        click.echo(f"error: {err}", err=True)
        sys.exit(EXIT_INPUT)


def _load_worksheet(path: str):
    try:
        return load_worksheet(_read(path))
    except InputError as err:
        click.echo(f"error: {err}", err=True)
        sys.exit(EXIT_INPUT)


def _fmt_fraction(value: Fraction) -> str:
    return str(value)


def format_state(state: State) -> str:
    parts = []
    for name in sorted(state.scalars):
        parts.append(f"{name}={_fmt_fraction(state.scalars[name])}")
    for name in sorted(state.vectors):
        entries = ", ".join(_fmt_fraction(v) for v in state.vectors[name])
        parts.append(f"{name}=({entries})")
    for name in sorted(state.splits):
        parts.append(f"split({name})={state.splits[name]}")
    return ", ".join(parts)


def _print_obligations(obligations) -> bool:
    ok = True
    for o in obligations:
        click.echo(f"{o.name:<16} {o.verdict.label():<18} [{o.verdict.tier}] {o.description}")
        if not o.verdict.ok:
            ok = False
            if o.verdict.reason:
                click.echo(f"  reason: {o.verdict.reason}")
            if o.verdict.counterexample is not None:
                click.echo(f"  counterexample: {format_state(o.verdict.counterexample)}")
    return ok


mode_option = click.option(
    "--mode", type=click.Choice([INDEXED, FLAME]), default=INDEXED, show_default=True
)
seed_option = click.option("--seed", type=int, default=None, help=f"overrides {ENV_SEED}")
trials_option = click.option("--trials", type=int, default=DEFAULT_TRIALS, show_default=True)


@click.group()
def main():
    """Derive provably correct reduction loops from pre/postcondition specs."""


@main.command()
@click.argument("spec_file", type=click.Path())
@mode_option
def invariants(spec_file, mode):
    """List candidate loop invariants with validity and rejection reasons."""
    spec = _load_spec(spec_file)
    try:
        candidates = enumerate_invariants(spec, mode)
    except DerivationError as err:
        click.echo(f"error: {err}", err=True)
        sys.exit(EXIT_DERIVATION)
    click.echo(f"invariant candidates for {spec.name} ({mode} mode)")
    for c in candidates:
        status = "valid" if c.valid else "rejected"
        click.echo(f"{c.cid:>2}  {status:<9} {c.direction:<14} {render_pred(c.predicate)}")
        click.echo(f"    {c.label}")
        for note in c.repairs:
            click.echo(f"    note: {note}")
        if not c.valid:
            click.echo(f"    reason: {c.reason}")
    sys.exit(EXIT_OK)


@main.command("derive")
@click.argument("spec_file", type=click.Path())
@click.option("--invariant", "invariant_id", type=int, required=True)
@mode_option
@seed_option
@trials_option
@click.option("-o", "--output", type=click.Path(), default=None, help="write the worksheet here")
def derive_cmd(spec_file, invariant_id, mode, seed, trials, output):
    """Fill the eight-step worksheet for one invariant and verify it."""
    spec = _load_spec(spec_file)
    seed = resolve_seed(seed)
    try:
        w = derive(spec, invariant_id, mode, trials=trials, seed=seed)
    except DerivationError as err:
        click.echo(f"error: {err}", err=True)
        sys.exit(EXIT_DERIVATION)
    text = save_worksheet(w)
    if output:
        with open(output, "w", encoding="utf-8") as handle:
            handle.write(text)
        click.echo(f"wrote {output}", err=True)
    else:
        click.echo(text, nl=False)
    if not w.complete():
        click.echo("error: an obligation was falsified", err=True)
        for o in w.obligations:
            if not o.verdict.ok:
                click.echo(f"  {o.name}: {o.verdict.reason}", err=True)
        sys.exit(EXIT_FALSIFIED)
    sys.exit(EXIT_OK)


@main.command("verify")
@click.argument("worksheet_file", type=click.Path())
@seed_option
@trials_option
def verify_cmd(worksheet_file, seed, trials):
    """Check the loop obligations of a worksheet, derived or hand-written."""
    w = _load_worksheet(worksheet_file)
    seed = resolve_seed(seed)
    try:
        obligations = verify(w, trials=trials, seed=seed)
    except FlamesmithError as err:
        click.echo(f"error: {err}", err=True)
        sys.exit(EXIT_INPUT)
    click.echo(f"verifying {w.spec.name} invariant {w.candidate.cid} ({w.mode} mode)")
    ok = _print_obligations(obligations)
    if ok:
        click.echo("all obligations hold")
        sys.exit(EXIT_OK)
    click.echo("FALSIFIED: at least one obligation fails")
    sys.exit(EXIT_FALSIFIED)


def _parse_coeffs(text: str):
    text = text.strip()
    if not text:
        return []
    try:
        return [Fraction(part.strip()) for part in text.split(",")]
    except (ValueError, ZeroDivisionError) as err:
        raise click.UsageError(f"bad --coeffs value: {err}")


@main.command("run")
@click.argument("worksheet_file", type=click.Path())
@click.option("--coeffs", default="", help="comma-separated exact coefficients, lowest degree first")
@click.option("--x", "point", required=True, help="evaluation point (exact rational)")
@click.option("--check-invariants", is_flag=True, default=False)
@click.option("--trace", is_flag=True, default=False)
def run_cmd(worksheet_file, coeffs, point, check_invariants, trace):
    """Execute a worksheet's algorithm on concrete inputs."""
    w = _load_worksheet(worksheet_file)
    try:
        values = _parse_coeffs(coeffs)
        point_value = Fraction(point)
    except ZeroDivisionError:
        raise click.UsageError("bad --x value")
    state = make_input_state(w, values, point_value)
    try:
        result = run(w, state, check_invariants=check_invariants)
    except InvariantViolation as err:
        click.echo(f"invariant violation at iteration {err.iteration} ({err.site})")
        click.echo(f"  state: {format_state(err.state)}")
        sys.exit(EXIT_FALSIFIED)
    except EvalError as err:
        click.echo(f"error: {err}", err=True)
        sys.exit(EXIT_FALSIFIED)
    if trace:
        click.echo(f"init: {_fmt_snapshot(result.initial)}")
        for number, snap in enumerate(result.iterations, start=1):
            click.echo(f"iteration {number}: {_fmt_snapshot(snap)}")
    click.echo(f"{w.output_name()} = {_fmt_fraction(result.result)}")
    sys.exit(EXIT_OK)


def _fmt_snapshot(snap: dict) -> str:
    return ", ".join(f"{k}={snap[k]}" for k in sorted(snap))


@main.command("cost")
@click.argument("worksheet_file", type=click.Path())
@click.option("--max-n", type=int, default=64, show_default=True)
@seed_option
@trials_option
def cost_cmd(worksheet_file, max_n, seed, trials):
    """Instrument with a flop counter, solve the recurrence, prove the cost."""
    w = _load_worksheet(worksheet_file)
    seed = resolve_seed(seed)
    if w.cost is None:
        w = instrument(w)
    try:
        rec = recurrence_of(w)
        solve_recurrence(rec)
        report = prove_cost(w, trials=trials, seed=seed, max_n=max_n)
    except UnsupportedRecurrence as err:
        click.echo(f"cost analysis for {w.spec.name} invariant {w.candidate.cid} ({w.mode} mode)")
        click.echo(f"per-iteration flops (symbolic): {_symbolic_count(w)}")
        click.echo(f"error: {err}", err=True)
        sys.exit(EXIT_DERIVATION)
    except FlamesmithError as err:
        click.echo(f"error: {err}", err=True)
        sys.exit(EXIT_FALSIFIED)
    from .specfile import render_expr

    click.echo(f"cost analysis for {w.spec.name} invariant {w.candidate.cid} ({w.mode} mode)")
    click.echo(f"per-iteration flops: {report.increment}")
    click.echo(f"recurrence: {report.recurrence.describe()}")
    click.echo(f"closed form: {render_expr(report.closed_form)}")
    click.echo(f"cost invariant: {render_pred(report.cost_invariant)}")
    click.echo(f"total cost: {render_expr(report.total_cost)}")
    click.echo("obligations:")
    _print_obligations(report.obligations)
    click.echo("measured flop counts:")
    row = []
    for n, count in report.runtime_counts:
        row.append(f"{n}:{count}")
        if len(row) == 8:
            click.echo("  " + "  ".join(row))
            row = []
    if row:
        click.echo("  " + "  ".join(row))
    click.echo("all measured counts match the closed form"
               if report.runtime_ok else "MEASURED COUNTS DIVERGE")
    sys.exit(EXIT_OK if report.runtime_ok else EXIT_FALSIFIED)


def _symbolic_count(w) -> str:
    from .specfile import render_expr

    return render_expr(w.cost.increment_expr)


@main.command("render")
@click.argument("worksheet_file", type=click.Path())
@click.option(
    "--format", "fmt", type=click.Choice(["text", "latex", "markdown"]), default="text",
    show_default=True,
)
def render_cmd(worksheet_file, fmt):
    """Pretty-print a worksheet in the two-column derivation layout."""
    w = _load_worksheet(worksheet_file)
    renderer = {"text": render_text, "latex": render_latex, "markdown": render_markdown}[fmt]
    click.echo(renderer(w), nl=False)
    sys.exit(EXIT_OK)


@main.command("derive-all")
@click.argument("spec_file", type=click.Path())
@click.option(
    "--mode", type=click.Choice([INDEXED, FLAME, "both"]), default="both", show_default=True
)
@seed_option
@trials_option
@click.option("--oracle-checks", type=int, default=1000, show_default=True,
              help="random inputs per derived algorithm")
def derive_all(spec_file, mode, seed, trials, oracle_checks):
    """Derive every valid candidate, cross-check all against the oracle."""
    spec = _load_spec(spec_file)
    seed = resolve_seed(seed)
    modes = [INDEXED, FLAME] if mode == "both" else [mode]
    rows = []
    any_falsified = False
    mismatches = 0
    for m in modes:
        try:
            candidates = enumerate_invariants(spec, m)
        except DerivationError as err:
            click.echo(f"error: {err}", err=True)
            sys.exit(EXIT_DERIVATION)
        for c in candidates:
            if not c.valid:
                continue
            try:
                w = derive(spec, c.cid, m, trials=trials, seed=seed)
            except DerivationError as err:
                click.echo(f"error: invariant {c.cid} ({m}): {err}", err=True)
                sys.exit(EXIT_DERIVATION)
            if not w.complete():
                any_falsified = True
            bad = _oracle_check(w, oracle_checks, seed)
            mismatches += bad
            closed = _closed_form_label(w)
            from .wksfile import render_stmt

            rows.append((
                m, c.cid, render_pred(w.guard), render_stmt(w.update), closed,
                f"ok ({oracle_checks}/{oracle_checks})" if bad == 0 else f"MISMATCH ({bad})",
            ))
    click.echo(f"derived algorithms for {spec.name}")
    header = f"{'mode':<8} {'id':>2}  {'guard':<16} {'update':<46} {'cost':<10} oracle"
    click.echo(header)
    for m, cid, guard, update, closed, ocheck in rows:
        click.echo(f"{m:<8} {cid:>2}  {guard:<16} {update:<46} {closed:<10} {ocheck}")
    click.echo(
        f"summary: {len(rows)} worksheets derived, {mismatches} oracle mismatches"
    )
    if mismatches or any_falsified:
        sys.exit(EXIT_FALSIFIED)
    sys.exit(EXIT_OK)


def _closed_form_label(w) -> str:
    from .specfile import render_expr

    wi = instrument(w)
    if wi.cost.increment is None:
        return "n/a"
    try:
        closed = solve_recurrence(recurrence_of(wi))
    except UnsupportedRecurrence:
        return "n/a"
    return render_expr(closed)


def _oracle_check(w, count: int, seed: int) -> int:
    from .predicate import Ne

    rng = random.Random(seed ^ 0x0AC1E)
    needs_nonzero = [
        a.lhs.name for a in w.requires.atoms
        if isinstance(a, Ne) and hasattr(a.lhs, "name")
    ]
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


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host, port):
    """Run the HTTP service wrapping the same derivation pipeline."""
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
