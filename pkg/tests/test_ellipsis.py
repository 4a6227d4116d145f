import itertools

import pytest
from hypothesis import given, settings, strategies as st

from ellipsis_hou.dsl import parse_problem
from ellipsis_hou.ellipsis import (
    EllipsisProblem,
    binding_body,
    build_equation,
    filter_antecedent_linking,
    filter_primary,
    is_abstracted,
    mark_derived_primaries,
    resolve,
    solve_report,
    solve_system,
    type_align,
)
from ellipsis_hou.errors import ElementNotFound, NoReading, TypeMismatch
from ellipsis_hou.render import render
from ellipsis_hou.runner import corpus_files, load_problem
from ellipsis_hou.terms import (
    E,
    GQ,
    T,
    Abs,
    App,
    Const,
    Prim,
    Var,
    alpha_equal,
    alpha_key,
    apply,
    arrow,
    collect_primaries,
    free_vars,
    iter_nodes,
    normalize,
    strip,
)
from ellipsis_hou.unify import Equation, Substitution, huet_unify

from helpers import corpus_problem

likes = Const("likes", arrow(E, E, T))
wife_of = Const("wife-of", arrow(E, E))
realize = Const("realize", arrow(E, T, T))
fool = Const("fool", arrow(E, T))
dan, george, john, bill = (Const(n, E) for n in ("dan", "george", "john", "bill"))
P = Var("P", arrow(E, T))
x = Var("x", E)


def corpus(name):
    return corpus_problem(name)


def texts(readings):
    return {r.text for r in readings}


def test_build_equation_wife():
    src = apply(likes, Prim(dan), App(wife_of, dan))
    eq = build_equation(src, [(dan, george)], P)
    assert eq.lhs == App(P, dan)
    assert eq.rhs == src
    assert eq.unknowns == frozenset({P})


def test_build_equation_errors():
    src = apply(likes, dan, App(wife_of, dan))
    with pytest.raises(ElementNotFound):
        build_equation(src, [(john, bill)], P)
    with pytest.raises(TypeMismatch):
        build_equation(src, [(dan, wife_of)], P)
    with pytest.raises(TypeMismatch):
        build_equation(src, [(dan, george)], Var("P", arrow(E, E, T)))


def test_filter_primary_wife():
    eq = Equation(App(P, dan), apply(likes, Prim(dan), App(wife_of, dan)), {P})
    raw = list(huet_unify([eq]))
    kept = filter_primary(raw)
    assert len(raw) == 4
    assert {render(s[P]) for s in kept} == {
        "lam x1:e. likes(x1, wife-of(dan))",
        "lam x1:e. likes(x1, wife-of(x1))",
    }


def test_is_abstracted_and_linking_filter():
    sloppy = Substitution({P: Abs(x, apply(likes, x, App(wife_of, x)))})
    strict = Substitution({P: Abs(x, apply(likes, x, App(wife_of, dan)))})
    odd = Substitution({P: Abs(x, apply(likes, dan, App(wife_of, x)))})
    params, body = binding_body(odd[P])
    assert is_abstracted(body, params, (1, 1))
    assert not is_abstracted(body, params, (0, 1))
    # the pronoun under wife-of is linked to the subject
    links = [((1, 1), (0, 1))]
    kept = filter_antecedent_linking([sloppy, strict, odd], links)
    assert kept == [sloppy, strict]
    assert filter_antecedent_linking([sloppy, strict, odd], links, enabled=False) == [sloppy, strict, odd]


def test_solve_system_wife():
    readings = solve_system(corpus("wife").to_problem())
    assert texts(readings) == {"likes(george, wife-of(dan))", "likes(george, wife-of(george))"}
    for r in readings:
        assert "P" in r.provenance


def test_solve_system_fool_cascade():
    readings = solve_system(corpus("fool").to_problem())
    assert len(readings) == 3
    assert "and(realize(john, fool(john)), and(realize(bill, fool(bill)), realize(wife-of(bill), fool(john))))" not in texts(readings)


def test_stage_counts_wescoat():
    report = solve_report(corpus("wescoat").to_problem(), linking=False)
    assert (report.counts.raw, report.counts.primary) == (20, 4)
    assert report.counts.raw >= report.counts.primary >= report.counts.linking


def test_solve_system_no_reading():
    # the primary occurrence is george, which is not a source element
    eq = Equation(App(P, dan), apply(likes, Prim(george), dan), frozenset({P}))
    problem = EllipsisProblem([eq], [[dan]], [[george]], App(P, george))
    with pytest.raises(NoReading) as info:
        solve_system(problem)
    assert info.value.causes


def test_mark_derived_primaries_example():
    binding = Abs(x, apply(realize, x, App(fool, john)))
    reading = apply(realize, bill, App(fool, john))
    marked = mark_derived_primaries(reading, binding, bill, [(0, 1)])
    assert marked == apply(realize, Prim(bill), App(fool, john))
    assert collect_primaries(marked) == [(0, 1)]


def test_mark_derived_primaries_leaves_unmatched_paths():
    binding = Abs(x, apply(realize, john, App(fool, x)))
    reading = apply(realize, john, App(fool, bill))
    # the primary path (0, 1) holds john, which was not abstracted
    assert mark_derived_primaries(reading, binding, bill, [(0, 1)]) == reading


def test_mark_derived_primaries_feeds_second_equation():
    """The marked reading works as a source: the secondary bill is kept free."""
    binding = Abs(x, apply(realize, x, App(fool, x)))
    reading = normalize(App(binding, bill))
    source = mark_derived_primaries(reading, binding, bill, [(0, 1)])
    Q = Var("Q", arrow(E, T))
    sols = filter_primary(huet_unify([Equation(App(Q, bill), source, {Q})]))
    assert {render(s[Q]) for s in sols} == {
        "lam x1:e. realize(x1, fool(bill))",
        "lam x1:e. realize(x1, fool(x1))",
    }


def test_type_align():
    q = Var("Q", GQ)
    s, t = type_align(dan, q)
    assert render(s) == "lam x1:e -> t. x1(dan)"
    assert t is q
    assert type_align(dan, george) == (dan, george)
    with pytest.raises(TypeMismatch):
        type_align(dan, Const("rain", T))


# -- properties over the corpus ---------------------------------------------

PLAIN = [p for p in corpus_files() if not load_problem(p).is_derivation]


@pytest.mark.parametrize("path", PLAIN, ids=lambda p: p.stem)
def test_readings_closed_and_unmarked(path):
    pf = load_problem(path)
    for r in solve_report(pf.to_problem()).readings:
        assert not free_vars(r.term)
        assert not any(isinstance(n, Prim) for _, n in iter_nodes(r.term))


@pytest.mark.parametrize("path", PLAIN, ids=lambda p: p.stem)
def test_linking_is_monotone(path):
    pf = load_problem(path)
    off = solve_report(pf.to_problem(), linking=False)
    on = solve_report(pf.to_problem(), linking=True)
    assert {alpha_key(r.term) for r in on.readings} <= {alpha_key(r.term) for r in off.readings}
    assert on.counts.linking <= off.counts.linking


@pytest.mark.parametrize("path", PLAIN, ids=lambda p: p.stem)
def test_order_freedom(path):
    problem = load_problem(path).to_problem()
    n = len(problem.equations)
    want = {alpha_key(r.term) for r in solve_report(problem).readings}
    for order in itertools.permutations(range(n)):
        got = {alpha_key(r.term) for r in solve_report(problem.permuted(order)).readings}
        assert got == want


@pytest.mark.parametrize("path", PLAIN, ids=lambda p: p.stem)
def test_source_recovery(path):
    problem = load_problem(path).to_problem()
    result = resolve(problem)
    first = problem.equations[0]
    name = problem.names[0]
    for res in result.resolutions:
        binding = res.bindings[name]
        got = normalize(apply(binding, *problem.sources[0]))
        assert alpha_equal(got, strip(first.rhs))


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=4), st.integers(min_value=0, max_value=2))
def test_primary_count_law(k, extra):
    """k secondary copies of the source element give 2^k bindings after filtering."""
    a, b = Const("a", E), Const("b", E)
    c = Const("c", E)
    n = 1 + k + extra
    r = Const("r", arrow(*([E] * n), T))
    args = [Prim(a)] + [a] * k + [c] * extra
    eq = Equation(App(P, a), apply(r, *args), frozenset({P}))
    problem = EllipsisProblem([eq], [[a]], [[b]], App(P, b))
    report = solve_report(problem)
    assert report.counts.raw == 2 ** (k + 1)
    assert report.counts.primary == 2 ** k
    assert len(report.readings) == 2 ** k


def test_parse_inline_problem():
    pf = parse_problem("""
    (problem tiny
      (decl left (-> e t))
      (decl a e) (decl b e)
      (unknown P (-> e t))
      (frame (P b))
      (ellipsis P (source (left (prim a))) (parallel a b))
      (expect (left b)))
    """)
    assert texts(solve_system(pf.to_problem())) == {"left(b)"}
