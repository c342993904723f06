import pytest
from click.testing import CliRunner

from flamesmith.cli import main


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def spec_path(repo_root):
    return str(repo_root / "specs" / "polyeval.spec")


@pytest.fixture(scope="module")
def horner_path(tmp_path_factory, runner, spec_path):
    path = tmp_path_factory.mktemp("wks") / "horner.wks"
    result = runner.invoke(
        main,
        ["derive", spec_path, "--invariant", "5", "--mode", "indexed",
         "--trials", "150", "--seed", "42", "-o", str(path)],
    )
    assert result.exit_code == 0, result.output
    return str(path)


@pytest.fixture(scope="module")
def horner_flame_path(tmp_path_factory, runner, spec_path):
    path = tmp_path_factory.mktemp("wks") / "horner_flame.wks"
    result = runner.invoke(
        main,
        ["derive", spec_path, "--invariant", "5", "--mode", "flame",
         "--trials", "150", "--seed", "42", "-o", str(path)],
    )
    assert result.exit_code == 0, result.output
    return str(path)


class TestInvariants:
    def test_lists_candidates(self, runner, spec_path):
        result = runner.invoke(main, ["invariants", spec_path])
        assert result.exit_code == 0
        assert result.output.count("valid") >= 5
        assert "non-vacuity" in result.output

    def test_flame_mode(self, runner, spec_path):
        result = runner.invoke(main, ["invariants", spec_path, "--mode", "flame"])
        assert result.exit_code == 0
        assert "pi(a.B, x)" in result.output

    def test_parse_error_exit_2(self, runner, tmp_path):
        bad = tmp_path / "bad.spec"
        bad.write_text("op broken\nvar y : scalar out\n")
        result = runner.invoke(main, ["invariants", str(bad)])
        assert result.exit_code == 2

    def test_missing_file_exit_2(self, runner):
        result = runner.invoke(main, ["invariants", "/nonexistent.spec"])
        assert result.exit_code == 2


class TestDerive:
    def test_stdout_worksheet(self, runner, spec_path):
        result = runner.invoke(
            main,
            ["derive", spec_path, "--invariant", "5", "--trials", "100", "--seed", "42"],
        )
        assert result.exit_code == 0
        assert result.output.startswith("flamesmith worksheet v1")
        assert "step-8: y := a[k - 1] + y * x" in result.output

    def test_rejected_invariant_exit_3(self, runner, spec_path):
        result = runner.invoke(
            main, ["derive", spec_path, "--invariant", "7", "--trials", "50"]
        )
        assert result.exit_code == 3

    def test_unknown_invariant_exit_3(self, runner, spec_path):
        result = runner.invoke(
            main, ["derive", spec_path, "--invariant", "42", "--trials", "50"]
        )
        assert result.exit_code == 3


class TestVerify:
    def test_clean_worksheet(self, runner, horner_path):
        result = runner.invoke(main, ["verify", horner_path, "--trials", "120"])
        assert result.exit_code == 0
        assert "all obligations hold" in result.output
        assert "PROVED" in result.output

    def test_mutants_falsified(self, runner, repo_root):
        mutants = sorted((repo_root / "fixtures" / "mutants").glob("*.wks"))
        assert len(mutants) == 5
        for path in mutants:
            result = runner.invoke(
                main, ["verify", str(path), "--seed", "42", "--trials", "1000"]
            )
            assert result.exit_code == 1, path.name
            assert "FALSIFIED" in result.output, path.name
            assert "counterexample:" in result.output, path.name


class TestRun:
    def test_prints_result(self, runner, horner_path):
        result = runner.invoke(main, ["run", horner_path, "--coeffs", "1,2,3", "--x", "2"])
        assert result.exit_code == 0
        assert result.output == "y = 17\n"

    def test_empty_coeffs(self, runner, horner_path):
        result = runner.invoke(main, ["run", horner_path, "--coeffs", "", "--x", "5"])
        assert result.exit_code == 0
        assert result.output == "y = 0\n"

    def test_trace(self, runner, horner_path):
        result = runner.invoke(
            main, ["run", horner_path, "--coeffs", "1,2,3", "--x", "2", "--trace"]
        )
        assert result.exit_code == 0
        assert "iteration 3:" in result.output

    def test_check_invariants_flag(self, runner, horner_flame_path):
        result = runner.invoke(
            main,
            ["run", horner_flame_path, "--coeffs", "1,2,3", "--x", "2", "--check-invariants"],
        )
        assert result.exit_code == 0
        assert "y = 17" in result.output

    def test_rational_inputs(self, runner, horner_path):
        result = runner.invoke(
            main, ["run", horner_path, "--coeffs", "1/2,1/3", "--x", "1/5"]
        )
        assert result.exit_code == 0
        assert result.output == "y = 17/30\n"


class TestCost:
    def test_horner_cost_report(self, runner, horner_flame_path):
        result = runner.invoke(
            main, ["cost", horner_flame_path, "--max-n", "16", "--trials", "100"]
        )
        assert result.exit_code == 0
        assert "per-iteration flops: 2" in result.output
        assert "recurrence: C_0 = 0, C_(k+1) = C_k + 2" in result.output
        assert "closed form: 2 * k" in result.output
        assert "cost invariant: C = 2 * m(a.B)" in result.output
        assert "total cost: 2 * m(a)" in result.output
        assert "all measured counts match" in result.output

    def test_symbolic_cost_exit_3(self, runner, spec_path, tmp_path, runner_out=None):
        path = tmp_path / "inv1.wks"
        derive_result = CliRunner().invoke(
            main,
            ["derive", str(spec_path), "--invariant", "1", "--trials", "80",
             "--seed", "42", "-o", str(path)],
        )
        assert derive_result.exit_code == 0
        result = CliRunner().invoke(main, ["cost", str(path), "--trials", "50"])
        assert result.exit_code == 3
        assert "symbolic" in result.output


class TestRender:
    def test_formats(self, runner, horner_path):
        for fmt, marker in (
            ("text", "Worksheet:"),
            ("latex", "\\documentclass"),
            ("markdown", "### Worksheet"),
        ):
            result = runner.invoke(main, ["render", horner_path, "--format", fmt])
            assert result.exit_code == 0
            assert marker in result.output


class TestDeriveAll:
    def test_summary_table(self, runner, spec_path):
        result = runner.invoke(
            main,
            ["derive-all", spec_path, "--trials", "60", "--seed", "42",
             "--oracle-checks", "60"],
        )
        assert result.exit_code == 0, result.output
        assert "12 worksheets derived, 0 oracle mismatches" in result.output
        assert result.output.count("ok (60/60)") == 12


class TestSeedHandling:
    def test_env_seed(self, runner, horner_path, monkeypatch):
        monkeypatch.setenv("FLAMESMITH_SEED", "7")
        r1 = runner.invoke(main, ["verify", horner_path, "--trials", "80"])
        monkeypatch.setenv("FLAMESMITH_SEED", "not-a-number")
        r2 = runner.invoke(main, ["verify", horner_path, "--trials", "80"])
        assert r1.exit_code == 0
        assert r2.exit_code != 0  # picked up and rejected

    def test_flag_wins_over_env(self, runner, horner_path, monkeypatch):
        monkeypatch.setenv("FLAMESMITH_SEED", "not-a-number")
        result = runner.invoke(
            main, ["verify", horner_path, "--trials", "80", "--seed", "42"]
        )
        assert result.exit_code == 0


class TestDeterminism:
    def test_byte_identical_outputs(self, runner, spec_path, horner_path):
        commands = [
            ["invariants", spec_path],
            ["derive", spec_path, "--invariant", "5", "--trials", "80", "--seed", "42"],
            ["verify", horner_path, "--trials", "80", "--seed", "42"],
            ["run", horner_path, "--coeffs", "1,2,3", "--x", "2", "--trace"],
            ["cost", horner_path, "--max-n", "8", "--trials", "60", "--seed", "42"],
            ["render", horner_path, "--format", "latex"],
        ]
        for argv in commands:
            first = runner.invoke(main, argv)
            second = runner.invoke(main, argv)
            assert first.output == second.output, argv
            assert first.exit_code == second.exit_code, argv
