import pytest

from flamesmith.cost import instrument
from flamesmith.errors import WorksheetFormatError
from flamesmith.expr import IntConst, Sub, Var
from flamesmith.invariants import enumerate_invariants
from flamesmith.wksfile import (
    HEADER,
    load_worksheet,
    parse_stmt_text,
    render_stmt,
    save_worksheet,
)
from flamesmith.worksheet import derive, verify
from flamesmith.wp import MergeBack, PartitionInit, Repartition, Seq, SimAssign

k, n = Var("k"), Var("n")


def worksheet_core(w):
    return (
        w.mode, w.spec, w.candidate.cid, w.candidate.predicate,
        w.candidate.auxiliaries, w.candidate.direction,
        w.pre, w.post, w.guard, w.init, w.init_wp, w.update,
        w.index_update, w.repartition, w.merge, w.step6, w.step7,
        w.requires, w.notes, w.cost,
    )


class TestStatements:
    CASES = [
        ("y, k := 0, n", SimAssign(("y", "k"), (IntConst(0), n))),
        ("k := k - 1", SimAssign(("k",), (Sub(k, IntConst(1)),))),
        ("partition a with a.B empty", PartitionInit("a", empty_side="B")),
        ("repartition a exposing a.1 from a.T", Repartition("a", expose_from="T")),
        ("merge a.1 into a.B", MergeBack("a", into="B")),
        (
            "y := 0 ; partition a with a.B empty",
            Seq(SimAssign(("y",), (IntConst(0),)), PartitionInit("a", empty_side="B")),
        ),
    ]

    @pytest.mark.parametrize("text,expected", CASES)
    def test_parse(self, text, expected):
        assert parse_stmt_text(text) == expected

    @pytest.mark.parametrize("text,expected", CASES)
    def test_render_round_trip(self, text, expected):
        assert parse_stmt_text(render_stmt(expected)) == expected

    def test_arity_mismatch(self):
        with pytest.raises(WorksheetFormatError):
            parse_stmt_text("y, k := 0")

    def test_bad_command(self):
        with pytest.raises(WorksheetFormatError):
            parse_stmt_text("frobnicate a")


class TestRoundTrip:
    def test_all_worksheets_round_trip(self, polyeval):
        for mode in ("indexed", "flame"):
            for c in enumerate_invariants(polyeval, mode):
                if not c.valid:
                    continue
                w = derive(polyeval, c.cid, mode, trials=60, seed=42)
                again = load_worksheet(save_worksheet(w))
                assert worksheet_core(again) == worksheet_core(w), (mode, c.cid)

    def test_instrumented_round_trip(self, horner_indexed):
        wi = instrument(horner_indexed)
        again = load_worksheet(save_worksheet(wi))
        assert again.cost == wi.cost
        assert again.invariant() == wi.invariant()

    def test_reloaded_worksheet_verifies(self, horner_flame):
        again = load_worksheet(save_worksheet(horner_flame))
        obligations = verify(again, trials=120, seed=42)
        assert all(o.verdict.ok for o in obligations)

    def test_saved_text_is_stable(self, horner_indexed):
        text = save_worksheet(horner_indexed)
        assert save_worksheet(load_worksheet(text)) == text


class TestFormatErrors:
    def test_header_required(self):
        with pytest.raises(WorksheetFormatError):
            load_worksheet("not a worksheet\n")

    def test_missing_field(self, horner_indexed):
        text = save_worksheet(horner_indexed)
        broken = "\n".join(
            line for line in text.splitlines() if not line.startswith("step-3:")
        )
        with pytest.raises(WorksheetFormatError) as err:
            load_worksheet(broken)
        assert "step-3" in str(err.value)

    def test_duplicate_key(self, horner_indexed):
        text = save_worksheet(horner_indexed) + "mode: indexed\n"
        with pytest.raises(WorksheetFormatError):
            load_worksheet(text)

    def test_bad_mode(self, horner_indexed):
        text = save_worksheet(horner_indexed).replace("mode: indexed", "mode: sideways")
        with pytest.raises(WorksheetFormatError):
            load_worksheet(text)
