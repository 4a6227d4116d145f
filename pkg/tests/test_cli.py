import json
import subprocess
import sys

import pytest

from ellipsis_hou.cli import main

GOOD = """
(problem tiny
  (decl left (-> e t))
  (decl a e)
  (decl b e)
  (unknown P (-> e t))
  (frame (P b))
  (ellipsis P (source (left (prim a))) (parallel a b))
  (expect (left b)))
"""


@pytest.fixture
def write(tmp_path):
    def _write(name, text):
        p = tmp_path / name
        p.write_text(text, encoding="utf-8")
        return str(p)

    return _write


def test_pass_exit_zero(write, capsys):
    assert main([write("good.ell", GOOD)]) == 0
    out = capsys.readouterr().out
    assert "tiny (linking off): pass" in out
    assert "summary: pass 1" in out


def test_mismatch_exit_one(write):
    bad = GOOD.replace("(expect (left b))", "(expect (left a))")
    assert main([write("bad.ell", bad)]) == 1


def test_engine_error_exit_two(capsys):
    # the raised reading needs a deeper search than one level
    from ellipsis_hou.runner import corpus_files

    [path] = [str(p) for p in corpus_files() if "revise_raise" in p.name]
    assert main([path, "--budget-depth", "1", "--report", "json"]) == 2
    [r] = json.loads(capsys.readouterr().out)["problems"]
    assert r["status"] == "error"
    assert r["error"].startswith("BudgetExhausted")


def test_parse_error_exit_three(write, capsys):
    assert main([write("broken.ell", "(problem")]) == 3
    assert "DslSyntaxError" in capsys.readouterr().err


def test_most_severe_code_wins(write):
    bad = GOOD.replace("(expect (left b))", "(expect (left a))")
    assert main([write("a.ell", GOOD), write("b.ell", bad), write("c.ell", "(problem")]) == 3


def test_missing_file_is_parse_error(tmp_path):
    assert main([str(tmp_path / "absent.ell")]) == 3


def test_nonpositive_budget_rejected(write):
    assert main([write("good.ell", GOOD), "--max-solutions", "0"]) == 3


def test_json_report_fields(write, capsys):
    assert main([write("good.ell", GOOD), "--report", "json"]) == 0
    data = json.loads(capsys.readouterr().out)
    [r] = data["problems"]
    assert r["problem"] == "tiny"
    assert r["status"] == "pass"
    assert r["readings"] == ["left(b)"]
    assert r["bindings"] == [{"P": "left"}]
    assert r["counts"] == {"raw": 2, "primary": 1, "linking": 1}
    assert r["missing"] == [] and r["unexpected"] == []
    for key in ("failures", "branches", "expected", "error", "linking", "title"):
        assert key in r


def test_linking_override(write, capsys):
    main([write("good.ell", GOOD), "--linking", "on", "--report", "json"])
    data = json.loads(capsys.readouterr().out)
    assert data["problems"][0]["linking"] == "on"


def test_bundled_corpus_passes(capsys):
    assert main([]) == 0
    out = capsys.readouterr().out
    assert "fail" not in out.split("summary:")[-1]


def test_corpus_directory_option(tmp_path, capsys):
    (tmp_path / "one.ell").write_text(GOOD, encoding="utf-8")
    (tmp_path / "ignored.txt").write_text("junk", encoding="utf-8")
    assert main(["--corpus", str(tmp_path), "--report", "json"]) == 0
    assert len(json.loads(capsys.readouterr().out)["problems"]) == 1


def test_json_output_deterministic():
    cmd = [sys.executable, "-m", "ellipsis_hou.cli", "--report", "json"]
    first = subprocess.run(cmd, capture_output=True, text=True, check=True).stdout
    second = subprocess.run(cmd, capture_output=True, text=True, check=True).stdout
    assert first == second
    assert json.loads(first)["problems"]
