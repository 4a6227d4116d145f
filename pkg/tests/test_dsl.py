import pytest

from ellipsis_hou.dsl import Atom, QuotedString, SList, parse_problem, parse_term, read_sexprs
from ellipsis_hou.errors import DslSyntaxError, TypeMismatch, UnknownConstant, UnresolvedSelector
from ellipsis_hou.render import read_rendered, render
from ellipsis_hou.runner import corpus_files, load_problem
from ellipsis_hou.terms import E, Prim, T, alpha_key, arrow, collect_primaries, iter_nodes, type_of

MINIMAL = """
(problem tiny
  (decl left (-> e t))
  (decl a e)
  (decl b e)
  (unknown P (-> e t))
  (frame (P b))
  (ellipsis P (source (left (prim a))) (parallel a b))
  (expect (left b)))
"""


def tiny(body):
    return "(problem tiny (decl left (-> e t)) (decl likes (-> e e t)) (decl a e) (decl b e)\n" + body + ")"


def test_read_sexprs_positions():
    [form] = read_sexprs('(a\n  (b "c d"))')
    assert isinstance(form, SList)
    assert form[0] == Atom("a")
    inner = form[1]
    assert (inner.line, inner.column) == (2, 3)
    assert isinstance(inner[1], QuotedString)
    assert inner[1] == "c d"


def test_comments_ignored():
    assert read_sexprs("; nothing\n(a) ; trailing\n") == [["a"]]


@pytest.mark.parametrize(
    "text, line, column",
    [
        ("(problem x", 1, 1),
        ("(problem x))", 1, 12),
        ('(problem x\n  (title "open', 2, 10),
    ],
)
def test_syntax_errors_carry_position(text, line, column):
    with pytest.raises(DslSyntaxError) as info:
        parse_problem(text)
    assert (info.value.line, info.value.column) == (line, column)


def test_two_forms_rejected():
    with pytest.raises(DslSyntaxError):
        parse_problem(MINIMAL + "\n(problem other)")


def test_minimal_file():
    pf = parse_problem(MINIMAL)
    assert pf.name == "tiny"
    assert list(pf.unknowns) == ["P"]
    assert not pf.is_derivation
    [decl] = pf.ellipses
    assert render(decl.source) == "left({a})"
    assert collect_primaries(decl.source) == [(1,)]
    assert [render(t) for t in pf.expectation(False)] == ["left(b)"]
    problem = pf.to_problem()
    assert problem.names == ["P"]


def test_unknown_constant():
    with pytest.raises(UnknownConstant):
        parse_problem(tiny("(unknown P (-> e t)) (frame (P c)) (ellipsis P (source (left (prim a))) (parallel a b))"))


def test_type_mismatch_in_term():
    with pytest.raises(TypeMismatch):
        parse_problem(tiny("(unknown P (-> e t)) (frame (P left)) (ellipsis P (source (left (prim a))) (parallel a b))"))


def test_unresolved_selector():
    with pytest.raises(UnresolvedSelector):
        parse_problem(tiny(
            "(unknown P (-> e t)) (frame (and (likes (prim a) a) (P b)))"
            " (ellipsis P (site (occ (left 1))) (parallel a b))"))


def test_site_selector_resolves():
    pf = parse_problem(tiny(
        "(unknown P (-> e t)) (frame (likes (prim a) a))"
        " (ellipsis P (site (occ)) (parallel a b))"))
    assert render(pf.source_of(pf.ellipses[0])) == "likes({a}, a)"


def test_flags_and_expect_modes():
    pf = parse_problem(tiny(
        "(unknown P (-> e t)) (frame (P b))"
        " (ellipsis P (source (left (prim a))) (parallel a b))"
        " (flags (linking on) (depth 4) (max-solutions 7))"
        " (expect (linking on) (left b))"
        " (expect (linking off) (left b) (left a))"))
    assert pf.linking is True
    assert (pf.budget.max_depth, pf.budget.max_solutions) == (4, 7)
    assert len(pf.expectation(True)) == 1
    assert len(pf.expectation(False)) == 2


def test_parse_term_in_problem_vocabulary():
    pf = parse_problem(MINIMAL)
    t = parse_term("(lam x e (left x))", pf)
    assert type_of(t) == arrow(E, T)
    with pytest.raises(UnknownConstant):
        parse_term("(right a)", pf)


@pytest.mark.parametrize("path", corpus_files(), ids=lambda p: p.stem)
def test_corpus_terms_round_trip_through_render(path):
    pf = load_problem(path)
    terms = [pf.frame] + [pf.source_of(d) for d in pf.ellipses]
    for ts in pf.expected.values():
        terms.extend(ts)
    for t in terms:
        back = read_rendered(render(t), pf.env, dict(pf.unknowns) | dict(pf.variables))
        assert alpha_key(back) == alpha_key(t)


def test_bind_assumption_rejected_with_position():
    with pytest.raises(DslSyntaxError) as info:
        parse_problem(tiny("(var x e) (unknown P (-> e t)) (assume (bind x)) (matrix (P b))"
                           " (ellipsis P (site (occ)) (parallel a b))"))
    assert info.value.line == 2
