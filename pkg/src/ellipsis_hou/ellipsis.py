"""Ellipsis equations, the two solution filters, and cascaded systems.

An elliptical clause contributes one equation ``P(s1, ..., sn) = s`` where
``s`` is the source clause's interpretation with its primary occurrences
wrapped in :class:`~ellipsis_hou.terms.Prim`.  The target reading is
``P(t1, ..., tn)`` under each surviving solution.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .errors import BudgetExhausted, ElementNotFound, NoReading, NotUnifiable, TypeMismatch
from .render import render
from .terms import (
    GQ,
    Abs,
    App,
    E,
    Prim,
    T,
    Term,
    Var,
    alpha_key,
    apply,
    arrow,
    children,
    collect_primaries,
    core,
    free_vars,
    iter_nodes,
    normalize,
    replace_at,
    spine,
    split_arrow,
    strip,
    subterm_at,
    substitute_many,
    type_of,
    wrap_prim_at,
)
from .unify import DEFAULT_BUDGET, Equation, SearchBudget, Substitution, huet_unify, solve_equation

log = logging.getLogger(__name__)

Path = tuple
Link = tuple  # (anaphor path, antecedent path), both relative to an equation rhs


@dataclass
class EllipsisProblem:
    equations: list
    sources: list
    targets: list
    frame: Term
    links: list = None
    names: list = None

    def __post_init__(self):
        n = len(self.equations)
        if len(self.sources) != n or len(self.targets) != n:
            raise ValueError("one source and one target list per equation")
        if self.links is None:
            self.links = [[] for _ in range(n)]
        if len(self.links) != n:
            raise ValueError("one link list per equation")
        for eq, srcs, tgts in zip(self.equations, self.sources, self.targets):
            head, args, _ = spine(eq.lhs)
            if not isinstance(head, Var):
                raise ValueError("equation lhs must be an unknown applied to its sources")
            if [alpha_key(a) for a in args] != [alpha_key(s) for s in srcs]:
                raise ValueError(f"{head.name} is not applied to its source elements")
            if len(srcs) != len(tgts):
                raise ValueError(f"{head.name}: parallel lists differ in length")
            for s, t in zip(srcs, tgts):
                if type_of(s) != type_of(t):
                    raise TypeMismatch(f"{head.name}: parallel elements {render(s)} and {render(t)} differ in type")
        if self.names is None:
            self.names = [u.name for u in self.unknowns]

    @property
    def unknowns(self) -> list:
        return [spine(eq.lhs)[0] for eq in self.equations]

    def permuted(self, order: Sequence[int]) -> "EllipsisProblem":
        pick = lambda xs: [xs[i] for i in order]
        return EllipsisProblem(
            pick(self.equations), pick(self.sources), pick(self.targets),
            self.frame, pick(self.links), pick(self.names),
        )


@dataclass
class Reading:
    term: Term
    provenance: dict = field(default_factory=dict)

    @property
    def text(self) -> str:
        return render(self.term)


@dataclass
class StageCounts:
    raw: int = 0
    primary: int = 0
    linking: int = 0

    def add(self, other: "StageCounts"):
        self.raw += other.raw
        self.primary += other.primary
        self.linking += other.linking

    def as_dict(self):
        return {"raw": self.raw, "primary": self.primary, "linking": self.linking}


@dataclass
class Failure:
    equation: str
    cause: str
    detail: str = ""
    branch: str = ""

    def as_dict(self):
        return {"equation": self.equation, "cause": self.cause, "detail": self.detail, "branch": self.branch}


@dataclass
class Resolution:
    bindings: dict
    frame: Term


@dataclass
class ResolveResult:
    resolutions: list
    counts: StageCounts
    failures: list


@dataclass
class SystemResult:
    readings: list
    counts: StageCounts
    failures: list


def _has_occurrence(matrix: Term, elem: Term) -> bool:
    key = alpha_key(elem)
    return any(alpha_key(core(node)) == key for _, node in iter_nodes(matrix))


def build_equation(source, parallels: Sequence[tuple], unknown: Var) -> Equation:
    """``unknown(s1, ..., sn) = matrix`` for an interpretation or a bare term."""
    matrix = source.matrix if hasattr(source, "matrix") else source
    srcs = [s for s, _ in parallels]
    for s, t in parallels:
        if type_of(s) != type_of(t):
            raise TypeMismatch(f"parallel elements {render(s)} and {render(t)} differ in type")
        if not _has_occurrence(matrix, s):
            raise ElementNotFound(f"{render(s)} does not occur in {render(matrix)}")
    expected = arrow(*[type_of(s) for s in srcs], type_of(matrix))
    if unknown.type != expected:
        raise TypeMismatch(f"{unknown.name} has type {unknown.type}, expected {expected}")
    return Equation(apply(unknown, *srcs), matrix, frozenset({unknown}))


def _contains_prim(t: Term) -> bool:
    return any(isinstance(node, Prim) for _, node in iter_nodes(t))


def filter_primary(solutions: Iterable[Substitution]) -> list:
    """Drop solutions whose bindings keep a primary occurrence."""
    return [s for s in solutions if not any(_contains_prim(b) for b in s.values())]


def binding_body(binding: Term, arity: Optional[int] = None):
    """Apply ``binding`` to fresh parameters; returns (params, normal body)."""
    param_types = split_arrow(type_of(binding))[0]
    if arity is not None:
        param_types = param_types[:arity]
    avoid = set(free_vars(binding))
    params = []
    for i, pt in enumerate(param_types, start=1):
        name = f"p{i}"
        while name in avoid:
            name += "'"
        avoid.add(name)
        params.append(Var(name, pt))
    return params, normalize(apply(binding, *params))


def is_abstracted(body: Term, params: Sequence[Var], path: Path) -> bool:
    """Whether walking ``path`` in ``body`` runs into one of the parameters."""
    names = {p.name for p in params}
    node = body
    for step in path:
        c = core(node)
        if isinstance(c, Var) and c.name in names:
            return True
        kids = dict(children(c))
        if step not in kids:
            return False
        node = kids[step]
    c = core(node)
    return isinstance(c, Var) and c.name in names


def filter_antecedent_linking(solutions: Iterable[Substitution], links: Iterable[Link], enabled: bool = True) -> list:
    """Drop solutions abstracting an anaphor but not its linked antecedent."""
    solutions = list(solutions)
    links = list(links)
    if not enabled or not links:
        return solutions
    out = []
    for sol in solutions:
        ok = True
        for binding in sol.values():
            params, body = binding_body(binding)
            for anaphor, antecedent in links:
                if is_abstracted(body, params, anaphor) and not is_abstracted(body, params, antecedent):
                    ok = False
        if ok:
            out.append(sol)
    return out


def mark_derived_primaries(reading: Term, binding: Term, target_elem, primary_paths: Iterable[Path], params=None) -> Term:
    """Mark as primary the target elements that fill abstraction positions
    which were primary in the source equation.

    ``reading`` must be ``binding`` applied to the target elements.
    ``target_elem`` is a term or the list of target terms; ``params`` optionally
    restricts which parameter positions are considered.
    """
    targets = [target_elem] if isinstance(target_elem, Term) else list(target_elem)
    ps, body = binding_body(binding, len(targets))
    index = {p.name: i for i, p in enumerate(ps)}
    primary = set(primary_paths)
    marked = reading
    for path, node in iter_nodes(body):
        c = core(node)
        if not (isinstance(c, Var) and c.name in index) or path not in primary:
            continue
        i = index[c.name]
        if params is not None and i not in params:
            continue
        try:
            here = subterm_at(marked, path)
        except (KeyError, IndexError, ValueError):
            continue
        if isinstance(here, Prim) or alpha_key(core(here)) != alpha_key(targets[i]):
            continue
        marked = wrap_prim_at(marked, path)
    return marked


def raise_entity(t: Term) -> Term:
    r = Var("R", arrow(E, T))
    if "R" in free_vars(t):
        r = Var("R'", arrow(E, T))
    return Abs(r, App(r, t))


def type_align(source_elem: Term, target_elem: Term) -> tuple:
    """Raise an entity-typed element to ``lam R. R(a)`` when its partner is a
    generalized quantifier."""
    st, tt = type_of(source_elem), type_of(target_elem)
    if st == tt:
        return source_elem, target_elem
    if st == E and tt == GQ:
        return raise_entity(source_elem), target_elem
    if st == GQ and tt == E:
        return source_elem, raise_entity(target_elem)
    raise TypeMismatch(f"cannot align {st} with {tt}")


# -- systems ----------------------------------------------------------------


@dataclass
class _Solved:
    binding: Term
    rhs: Term
    sources: list
    primaries: list


def _find_subterm(t: Term, target: Term, exclude: Path = None) -> Optional[Path]:
    key = alpha_key(target)
    for path, node in iter_nodes(t):
        if exclude is not None and path[: len(exclude)] == exclude:
            continue
        if alpha_key(core(node)) == key:
            return path
    return None


def _unknown_apps(t: Term, names: dict, path: Path = ()):
    """Outermost applications of the given unknowns, with their paths."""
    head, args, _ = spine(t)
    if isinstance(head, Var) and head.name in names and len(args) == names[head.name]:
        yield path, head, args
        return
    for i, kid in children(t):
        yield from _unknown_apps(kid, names, path + (i,))


class _Resolver:
    def __init__(self, problem: EllipsisProblem, budget: SearchBudget, linking: bool, branch: str = ""):
        self.problem = problem
        self.budget = budget
        self.linking = linking
        self.branch = branch
        self.counts = StageCounts()
        self.failures: list = []
        self.unknown_names = {u.name for u in problem.unknowns}

    def fail(self, i, cause, detail=""):
        self.failures.append(Failure(self.problem.names[i], cause, detail, self.branch))

    def run(self) -> list:
        out = []
        for solved in self._step({}, tuple(range(len(self.problem.equations)))):
            bindings = {self.problem.unknowns[i].name: s.binding for i, s in sorted(solved.items())}
            frame = normalize(substitute_many(self.problem.frame, bindings))
            out.append(Resolution(bindings, frame))
        return out

    def _unknowns_in(self, t):
        return set(free_vars(t)) & self.unknown_names

    def _step(self, solved, pending):
        if not pending:
            yield solved
            return
        solved_names = {self.problem.unknowns[i].name for i in solved}
        ready = [i for i in pending if self._unknowns_in(self.problem.equations[i].rhs) <= solved_names]
        if not ready:
            yield from self._joint(solved, pending)
            return
        i = ready[0]
        rest = tuple(j for j in pending if j != i)
        eq = self.problem.equations[i]
        unknown = self.problem.unknowns[i]
        rhs, derived = self._instantiate(i, solved)
        try:
            sols = solve_equation(Equation(eq.lhs, rhs, frozenset({unknown})), self.budget)
        except NotUnifiable as exc:
            self.fail(i, exc.reason, str(exc))
            return
        except BudgetExhausted as exc:
            self.fail(i, "budget", str(exc))
            return
        self.counts.raw += len(sols)
        kept = filter_primary(sols)
        self.counts.primary += len(kept)
        kept = filter_antecedent_linking(kept, list(self.problem.links[i]) + derived, self.linking)
        self.counts.linking += len(kept)
        if not kept:
            self.fail(i, "filtered", f"all {len(sols)} solutions removed by filters")
        for sol in kept:
            entry = _Solved(sol[unknown], rhs, list(self.problem.sources[i]), collect_primaries(rhs))
            yield from self._step({**solved, i: entry}, rest)

    def _instantiate(self, i, solved):
        """Replace solved unknown applications in equation ``i``'s rhs.

        Returns the new rhs and the links derived for it: a secondary
        occurrence left unabstracted in an earlier binding is linked to the
        matching occurrence in that earlier equation's source, as found in
        this rhs.
        """
        rhs = self.problem.equations[i].rhs
        my_sources = [alpha_key(s) for s in self.problem.sources[i]]
        arities = {}
        by_name = {}
        for j, entry in solved.items():
            u = self.problem.unknowns[j]
            arities[u.name] = len(entry.sources)
            by_name[u.name] = entry
        derived = []
        for q, head, args in list(_unknown_apps(rhs, arities)):
            entry = by_name[head.name]
            value = normalize(apply(entry.binding, *args))
            if [alpha_key(a) for a in args] and all(alpha_key(a) in my_sources for a in args):
                value = mark_derived_primaries(value, entry.binding, list(args), entry.primaries)
            rhs = replace_at(rhs, q, value)
            r = _find_subterm(rhs, strip(entry.rhs), exclude=q)
            if r is None:
                continue
            params, body = binding_body(entry.binding, len(entry.sources))
            source_keys = {alpha_key(s) for s in entry.sources}
            for p, node in iter_nodes(body):
                if alpha_key(core(node)) in source_keys and not is_abstracted(body, params, p):
                    derived.append((q + p, r + p))
        return rhs, derived

    def _joint(self, solved, pending):
        eqs = []
        for i in pending:
            rhs, _ = self._instantiate(i, solved)
            eq = self.problem.equations[i]
            eqs.append(Equation(eq.lhs, rhs, frozenset(self.problem.unknowns[j] for j in pending)))
        try:
            sols = list(huet_unify(eqs, self.budget))
        except NotUnifiable as exc:
            for i in pending:
                self.fail(i, exc.reason, str(exc))
            return
        except BudgetExhausted as exc:
            for i in pending:
                self.fail(i, "budget", str(exc))
            return
        self.counts.raw += len(sols)
        kept = filter_primary(sols)
        self.counts.primary += len(kept)
        links = [link for i in pending for link in self.problem.links[i]]
        kept = filter_antecedent_linking(kept, links, self.linking)
        self.counts.linking += len(kept)
        for sol in kept:
            extra = {}
            for i, eq in zip(pending, eqs):
                b = sol[self.problem.unknowns[i]]
                extra[i] = _Solved(b, sol.apply(eq.rhs), list(self.problem.sources[i]), collect_primaries(eq.rhs))
            yield {**solved, **extra}


def resolve(problem: EllipsisProblem, budget: SearchBudget = DEFAULT_BUDGET, linking: bool = False, branch: str = "") -> ResolveResult:
    """All binding combinations for a system, with filter counts and failures."""
    resolver = _Resolver(problem, budget, linking, branch)
    resolutions = resolver.run()
    return ResolveResult(resolutions, resolver.counts, resolver.failures)


def readings_of(resolutions: Iterable[Resolution]) -> list:
    seen = {}
    for res in resolutions:
        term = strip(res.frame)
        if free_vars(term):
            raise ValueError(f"reading {render(term)} is not closed")
        if type_of(term) != T:
            raise TypeMismatch(f"reading {render(term)} is not of type t")
        key = alpha_key(term)
        if key not in seen:
            seen[key] = Reading(term, dict(res.bindings))
    return sorted(seen.values(), key=lambda r: r.text)


def solve_report(problem: EllipsisProblem, budget: SearchBudget = DEFAULT_BUDGET, linking: bool = False) -> SystemResult:
    result = resolve(problem, budget, linking)
    return SystemResult(readings_of(result.resolutions), result.counts, result.failures)


def solve_system(problem: EllipsisProblem, budget: SearchBudget = DEFAULT_BUDGET, linking: bool = False) -> list:
    """The α-deduplicated readings of a system, sorted by rendered text."""
    result = solve_report(problem, budget, linking)
    if not result.readings:
        raise NoReading("no reading survives", causes=result.failures)
    return result.readings
