import json
import shutil
import pytest
from unittest.mock import patch
from eag_decide import main
from services.formula_core import is_sentence
from services.formula_parser import parse
from utils.formatting import format_syntax_error, model_path_for, safe_truncate


@pytest.fixture
def sentence_file(tmp_path):
    """Write a sentence into a temporary .fol file"""
    def _write(text: str, name: str = "input.fol") -> str:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return str(path)
    return _write


class TestDecideCommand:
    """Test the decide and model commands"""

    def test_valid_sentence(self, resource_path, capsys):
        assert main(["decide", "--theory", "ip", resource_path("ip-symmetry.fol")]) == 0
        out = capsys.readouterr().out
        assert "✅ Valid" in out
        assert "route: inner-product" in out
        assert "dimensions: all dimensions" in out

    def test_json_lines(self, resource_path, capsys):
        assert main(["decide", "--theory", "ms", "--format", "json-lines", resource_path("metric-bounded.fol")]) == 0
        record = json.loads(capsys.readouterr().out.strip())
        assert record["status"] == "Invalid"
        assert record["route"] == "metric-ae"
        assert record["model_path"] is None

    def test_model_file_is_written(self, resource_path, tmp_path, capsys):
        source = tmp_path / "bounded.fol"
        shutil.copy(resource_path("metric-bounded.fol"), source)
        assert main(["model", "--theory", "ms", str(source)]) == 0
        written = tmp_path / "bounded.model"
        assert written.read_text(encoding="utf-8").startswith("points 2\n")
        assert f"model: {written}" in capsys.readouterr().out

    def test_model_out_path(self, resource_path, tmp_path):
        out = tmp_path / "norm.model"
        assert main(["model", "--theory", "ns", "--out", str(out), resource_path("one-vs-two-norm.fol")]) == 0
        assert out.read_text(encoding="utf-8").startswith("dim 2\n")

    def test_unsupported_fragment(self, resource_path, capsys):
        assert main(["decide", "--theory", "ms", resource_path("metric-center.fol")]) == 2
        out = capsys.readouterr().out
        assert "❌ Unsupported" in out
        assert "citation: Theorem ms-ea-valid-undec" in out

    def test_satisfiability_mode(self, sentence_file, capsys):
        path = sentence_file("exists v:V. inner(v, v) > 0")
        assert main(["decide", "--mode", "satisfiability", path]) == 0
        assert "Satisfiable" in capsys.readouterr().out

    def test_budget_flag(self, sentence_file, capsys):
        path = sentence_file("exists x:R. x * x * x - x - 1 = 0")
        with patch('services.pipeline.monitoring'):
            assert main(["--budget", "1", "decide", path]) == 3
        assert "Budget" in capsys.readouterr().out


class TestInputErrors:
    """Test exit code 1 and error reporting"""

    def test_syntax_error_points_at_the_column(self, sentence_file, capsys):
        path = sentence_file("forall x:R. x >")
        assert main(["decide", path]) == 1
        out = capsys.readouterr().out
        assert "1:16:" in out
        assert out.rstrip().endswith("^")

    def test_missing_file(self, tmp_path, capsys):
        assert main(["decide", str(tmp_path / "absent.fol")]) == 1
        assert "Cannot read input" in capsys.readouterr().out

    def test_bad_dimension(self, resource_path):
        assert main(["decide", "--dim", "exactly:two", resource_path("ip-symmetry.fol")]) == 1

    def test_language_error(self, resource_path, capsys):
        assert main(["decide", "--theory", "ms", resource_path("norm-triangle.fol")]) == 1
        assert "❌" in capsys.readouterr().out

    def test_no_command(self, capsys):
        assert main([]) == 1


class TestOtherCommands:
    """Test classify, axioms and reduce"""

    def test_classify(self, resource_path, capsys):
        assert main(["classify", "--theory", "ns", resource_path("norm-triangle.fol")]) == 0
        assert capsys.readouterr().out.strip() == "purely-universal, additive, k=2, route: normed-universal"

    def test_axioms(self, capsys):
        assert main(["axioms", "--theory", "ms"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 3
        for line in lines:
            assert is_sentence(parse(line))

    def test_reduce_peano(self, capsys):
        assert main(["reduce", "peano", "--nat", "metric"]) == 0
        out = capsys.readouterr().out.strip()
        assert "d(" in out
        assert is_sentence(parse(out))

    def test_reduce_second_order(self, resource_path, capsys):
        args = ["reduce", "so", resource_path("so-excluded-middle.fol"), "--nat", resource_path("nat-nonneg.fol")]
        assert main(args) == 0
        assert is_sentence(parse(capsys.readouterr().out.strip()))

    def test_reduce_diophantine(self, resource_path, capsys):
        assert main(["reduce", "q1", resource_path("odd-square.fol")]) == 0
        assert "parameters left free" not in capsys.readouterr().out

    def test_reduce_mult_needs_a_relation(self, capsys):
        assert main(["reduce", "mult"]) == 1
        assert "--mult" in capsys.readouterr().out

    def test_relativize_rejects_sets(self, resource_path):
        assert main(["reduce", "relativize", resource_path("so-excluded-middle.fol")]) == 1


class TestFormatting:
    """Test output helpers"""

    def test_caret(self):
        text = format_syntax_error("forall x:R.\n  x = $", 2, 7, "unexpected character")
        lines = text.splitlines()
        assert lines[0] == "2:7: unexpected character"
        assert lines[1] == "    x = $"
        assert lines[2] == "  " + " " * 6 + "^"

    def test_caret_at_the_end_of_a_long_line(self):
        text = format_syntax_error("a" * 300 + "$", 1, 301, "unexpected character")
        _, source, caret = text.splitlines()
        assert source.startswith("  …")
        assert caret.index("^") == source.index("$")

    def test_long_line_is_windowed_around_the_column(self):
        text = format_syntax_error("a" * 100 + "$" + "b" * 200, 1, 101, "unexpected character")
        _, source, caret = text.splitlines()
        assert len(source) == 2 + 160
        assert source.endswith("…")
        assert caret.index("^") == source.index("$") == 2 + 80

    def test_column_past_the_end_is_clamped(self):
        caret = format_syntax_error("x >", 1, 40, "unexpected end of input").splitlines()[2]
        assert caret == "  " + " " * 3 + "^"

    def test_model_path(self):
        assert model_path_for("dir/sentence.fol") == "dir/sentence.model"
        assert model_path_for("dir/sentence.fol", "x.model") == "x.model"

    def test_truncate(self):
        assert safe_truncate(None) == ""
        assert safe_truncate("abcdef", 4) == "abc…"


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
