from flamesmith.render import render_latex, render_markdown, render_text


class TestText:
    def test_indexed_layout(self, horner_indexed):
        text = render_text(horner_indexed)
        assert "while 0 < k do" in text
        assert "y := a[k - 1] + y * x" in text
        assert "k := k - 1" in text
        assert "endwhile" in text
        # step labels present in worksheet order
        for label in ("1a", "4a", "4b", "2,3", "7", "8", "6", "5", "1b"):
            assert f"{label} |" in text

    def test_flame_layout_uses_greek(self, horner_flame):
        text = render_text(horner_flame)
        assert "ψ := α_1 + ψ * χ" in text  # psi := alpha_1 + psi * chi
        assert "m(a_B) < m(a)" in text
        assert "π(a_B, χ)" in text
        assert "repartition a exposing α_1 from a_T" in text

    def test_notes_shown(self, polyeval):
        from flamesmith.worksheet import derive

        w = derive(polyeval, 4, "indexed", trials=60, seed=42)
        text = render_text(w)
        assert "note:" in text and "!= 0" in text


class TestLatex:
    def test_compilable_shell(self, horner_indexed):
        tex = render_latex(horner_indexed)
        assert tex.startswith("\\documentclass{article}")
        assert "\\begin{document}" in tex
        assert tex.rstrip().endswith("\\end{document}")
        assert "\\begin{tabular}" in tex and "\\end{tabular}" in tex
        assert tex.count("{") == tex.count("}")

    def test_math_forms(self, horner_indexed):
        tex = render_latex(horner_indexed)
        assert "\\sum_{i=k}^{n - 1}" in tex
        assert "a_{k - 1} + y \\times x" in tex

    def test_flame_symbols(self, horner_flame):
        tex = render_latex(horner_flame)
        assert "\\psi" in tex and "\\chi" in tex and "\\alpha_1" in tex
        assert "\\pi(a_{B}, \\chi)" in tex


class TestMarkdown:
    def test_table(self, horner_indexed):
        md = render_markdown(horner_indexed)
        assert md.startswith("### Worksheet")
        assert "| Step | Annotation / command |" in md
        assert "| 8 |" in md


class TestDeterminism:
    def test_renders_are_stable(self, horner_indexed, horner_flame):
        for w in (horner_indexed, horner_flame):
            assert render_text(w) == render_text(w)
            assert render_latex(w) == render_latex(w)
            assert render_markdown(w) == render_markdown(w)
