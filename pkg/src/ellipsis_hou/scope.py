"""Assumption stores, quantifier discharge, and scope/ellipsis interleaving.

An interpretation is a matrix term together with pending assumptions.  A
quantifier assumption ``<q x r>`` is discharged by forming
``q(lam x. <r, matrix>)``.  Ellipsis resolution may happen before or after
any discharge, and :func:`enumerate_derivations` walks the legal
interleavings of a :class:`DerivationPlan`.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

from .ellipsis import (
    EllipsisProblem,
    Failure,
    Reading,
    StageCounts,
    raise_entity,
    readings_of,
    resolve,
    type_align,
)
from .errors import DischargeOrderViolation, TypeMismatch
from .render import render
from .terms import (
    E,
    Abs,
    App,
    Func,
    PairC,
    PairT,
    Prim,
    T,
    Term,
    Var,
    alpha_key,
    and_const,
    apply,
    arrow,
    fresh_name,
    free_vars,
    fst_const,
    normalize,
    occurs_free,
    replace_at,
    snd_const,
    split_arrow,
    subterm_at,
    substitute,
    substitute_many,
    type_of,
)
from .unify import DEFAULT_BUDGET, Equation, SearchBudget

log = logging.getLogger(__name__)

Path = tuple
# Where the discharged quantifier leaves the old matrix: det(lam x. <r, HERE>)
SCOPE_STEP = (1, 0, 1)


@dataclass(frozen=True)
class Quant:
    det: Term
    var: Var
    restriction: Term

    def __post_init__(self):
        dt = type_of(self.det)
        if not (isinstance(dt, Func) and dt.codomain == T and dt.domain == Func(self.var.type, PairT(T, T))):
            raise TypeMismatch(f"determiner has type {dt}, not a pair quantifier over {self.var.type}")
        if type_of(self.restriction) != T:
            raise TypeMismatch("restriction must have type t")

    def label(self) -> str:
        from .terms import core

        return f"{render(core(self.det))}/{self.var.name}"


@dataclass(frozen=True)
class Bind:
    var: Var

    def label(self) -> str:
        return f"bind/{self.var.name}"


Assumption = Union[Quant, Bind]


@dataclass(frozen=True)
class Interpretation:
    assumptions: tuple
    matrix: Term

    def __post_init__(self):
        object.__setattr__(self, "assumptions", tuple(self.assumptions))
        names = [a.var.name for a in self.assumptions]
        if len(set(names)) != len(names):
            raise ValueError("each assumption must introduce a distinct variable")


def _check_discharge(i: Interpretation, a) -> tuple:
    if a not in i.assumptions:
        raise ValueError(f"{a.label()} is not pending")
    rest = tuple(x for x in i.assumptions if x != a)
    for other in rest:
        if isinstance(other, Quant) and occurs_free(a.var.name, other.restriction):
            raise DischargeOrderViolation(f"{a.var.name} is free in the restriction of {other.label()}")
    return rest


def quantify(det: Term, var: Var, restriction: Term, scope: Term) -> Term:
    return App(det, Abs(var, PairC(restriction, scope)))


def discharge_quant(i: Interpretation, a: Quant) -> Interpretation:
    rest = _check_discharge(i, a)
    return Interpretation(rest, quantify(a.det, a.var, a.restriction, i.matrix))


def discharge_bind(i: Interpretation, b: Bind, nominal: Term) -> Term:
    """The modified-nominal property ``lam z. nominal(z) and matrix[x := z]``."""
    _check_discharge(i, b)
    if type_of(i.matrix) != T:
        raise TypeMismatch("matrix must have type t")
    if type_of(nominal) != Func(b.var.type, T):
        raise TypeMismatch("nominal must be a property of the bound variable's type")
    z = Var(fresh_name("z", set(free_vars(i.matrix)) | set(free_vars(nominal))), b.var.type)
    body = apply(and_const(), App(nominal, z), substitute(i.matrix, b.var, z))
    return normalize(Abs(z, body))


def np_contribution(i: Interpretation, a: Quant) -> Term:
    """``lam S. det(lam x. <restriction, S(x)>)``, the quantified NP's meaning."""
    if a not in i.assumptions:
        raise ValueError(f"{a.label()} is not pending")
    avoid = set(free_vars(a.det)) | set(free_vars(a.restriction))
    s = Var(fresh_name("S", avoid), Func(a.var.type, T))
    return Abs(s, quantify(a.det, a.var, a.restriction, App(s, a.var)))


def gq_of_pair(p: Term) -> Term:
    """G(P) = lam r. lam s. P(lam x. <r(x), s(x)>)."""
    ty = type_of(p)
    if not (isinstance(ty, Func) and ty.codomain == T and isinstance(ty.domain, Func)
            and ty.domain.codomain == PairT(T, T)):
        raise TypeMismatch(f"{ty} is not a pair-quantifier type")
    a = ty.domain.domain
    avoid = set(free_vars(p))
    r = Var(fresh_name("r", avoid), Func(a, T))
    s = Var(fresh_name("s", avoid | {r.name}), Func(a, T))
    x = Var(fresh_name("x", avoid | {r.name, s.name}), a)
    return normalize(Abs(r, Abs(s, App(p, Abs(x, PairC(App(r, x), App(s, x)))))))


def pair_of_gq(q: Term) -> Term:
    """P(Q) = lam p. Q(lam u. fst(p(u)))(lam v. snd(p(v)))."""
    ty = type_of(q)
    params, result = split_arrow(ty)
    if not (len(params) == 2 and result == T and params[0] == params[1]
            and isinstance(params[0], Func) and params[0].codomain == T):
        raise TypeMismatch(f"{ty} is not a generalized-quantifier type")
    a = params[0].domain
    avoid = set(free_vars(q))
    pt = PairT(T, T)
    p = Var(fresh_name("p", avoid), Func(a, pt))
    u = Var(fresh_name("u", avoid | {p.name}), a)
    v = Var(fresh_name("v", avoid | {p.name}), a)
    first = Abs(u, App(fst_const(pt), App(p, u)))
    second = Abs(v, App(snd_const(pt), App(p, v)))
    return normalize(Abs(p, apply(q, first, second)))


# -- derivation plans --------------------------------------------------------


@dataclass
class PendingEllipsis:
    """An ellipsis whose source is the subterm of the plan matrix at ``site``.

    ``links`` are relative to the source term, like equation links.
    """

    unknown: Var
    site: Path
    parallels: list
    links: list = field(default_factory=list)
    name: Optional[str] = None

    def __post_init__(self):
        if self.name is None:
            self.name = self.unknown.name


@dataclass
class DerivationPlan:
    interpretation: Interpretation
    ellipses: list

    def __post_init__(self):
        unknowns = [e.unknown.name for e in self.ellipses]
        if len(set(unknowns)) != len(unknowns):
            raise ValueError("every unknown belongs to exactly one ellipsis")
        mentioned = set(free_vars(self.interpretation.matrix))
        for a in self.interpretation.assumptions:
            if isinstance(a, Quant):
                mentioned |= set(free_vars(a.restriction))
        for e in self.ellipses:
            if e.unknown.name not in mentioned:
                raise ValueError(f"unknown {e.unknown.name} does not occur in the plan")
            subterm_at(self.interpretation.matrix, e.site)


@dataclass
class DerivationResult:
    readings: list
    counts: StageCounts
    failures: list
    branches: list


def _outside_occurs(name: str, matrix: Term, site: Path) -> bool:
    """Whether ``name`` occurs free in ``matrix`` outside the subterm at ``site``."""
    placeholder = Var(fresh_name("_hole", set(free_vars(matrix)) | {name}), type_of(subterm_at(matrix, site)))
    return occurs_free(name, replace_at(matrix, site, placeholder))


def _relocate(path: Path, site: Path) -> Path:
    if path[: len(site)] == site:
        return site + SCOPE_STEP + path[len(site):]
    return path


class _Enumerator:
    def __init__(self, plan: DerivationPlan, budget: SearchBudget, linking: bool):
        self.plan = plan
        self.budget = budget
        self.linking = linking
        for a in plan.interpretation.assumptions:
            if isinstance(a, Bind):
                raise ValueError("bind assumptions are discharged with discharge_bind, not in plans")
        self.quants = list(plan.interpretation.assumptions)
        self.counts = StageCounts()
        self.failures: list = []
        self.branches: list = []
        self.readings: dict = {}

    def site_options(self, a: Quant) -> list:
        """Ellipses whose source may hold ``a``'s discharge, plus ``None`` (root)."""
        matrix = self.plan.interpretation.matrix
        opts = []
        for k, e in enumerate(self.plan.ellipses):
            if not occurs_free(a.var.name, subterm_at(matrix, e.site)):
                continue
            if _outside_occurs(a.var.name, matrix, e.site):
                continue
            opts.append(k)
        opts.append(None)
        return opts

    def run(self) -> DerivationResult:
        seen = set()
        option_lists = [self.site_options(a) for a in self.quants]
        for assignment in itertools.product(*option_lists):
            groups: dict = {}
            for a, where in zip(self.quants, assignment):
                groups.setdefault(where, []).append(a)
            keys = sorted((k for k in groups if k is not None), key=lambda k: -len(self.plan.ellipses[k].site))
            perms = [list(itertools.permutations(groups[k])) for k in keys]
            root_perms = list(itertools.permutations(groups.get(None, [])))
            for site_orders in itertools.product(*perms):
                prepared = self.prepare(dict(zip(keys, site_orders)), keys)
                if prepared is None:
                    continue
                for root_order in root_perms:
                    key = (prepared["key"], tuple(a.var.name for a in root_order))
                    if key in seen:
                        continue
                    seen.add(key)
                    self.execute(prepared, root_order)
        readings = sorted(self.readings.values(), key=lambda r: r.text)
        return DerivationResult(readings, self.counts, self.failures, self.branches)

    def prepare(self, orders: dict, keys: list):
        """Discharge the site-assigned quantifiers inside their ellipsis sources."""
        matrix = self.plan.interpretation.matrix
        sites = [e.site for e in self.plan.ellipses]
        links = [list(e.links) for e in self.plan.ellipses]
        raised: list = [dict() for _ in self.plan.ellipses]
        pending = list(self.quants)
        steps = []
        for k in keys:
            for a in orders[k]:
                site = sites[k]
                others = [q for q in pending if q != a]
                if any(occurs_free(a.var.name, q.restriction) for q in others):
                    return None
                if _outside_occurs(a.var.name, matrix, site):
                    return None
                e = self.plan.ellipses[k]
                parallel = any(isinstance(s, Var) and s.name == a.var.name for s, _ in e.parallels)
                det, restr = (Prim(a.det), Prim(a.restriction)) if parallel else (a.det, a.restriction)
                matrix = replace_at(matrix, site, quantify(det, a.var, restr, subterm_at(matrix, site)))
                for j, other in enumerate(sites):
                    if j != k and other[: len(site)] == site and len(other) > len(site):
                        sites[j] = _relocate(other, site)
                for j, other in enumerate(sites):
                    if other == site:
                        links[j] = [(SCOPE_STEP + p, SCOPE_STEP + q) for p, q in links[j]]
                    elif site[: len(other)] == other and len(site) > len(other):
                        rel = site[len(other):]
                        links[j] = [(_relocate(p, rel), _relocate(q, rel)) for p, q in links[j]]
                if parallel:
                    raised[k][a.var.name] = a
                pending.remove(a)
                steps.append(f"discharge {a.label()} in source of {e.name}")
        key = (alpha_key(matrix, keep_prim=True), tuple(sorted(a.var.name for a in pending)))
        return {
            "matrix": matrix, "sites": sites, "links": links, "raised": raised,
            "pending": pending, "steps": steps, "key": key,
        }

    def build_problem(self, prepared: dict):
        matrix = prepared["matrix"]
        pending = list(prepared["pending"])
        equations, sources, targets, names, links = [], [], [], [], []
        rewrites = {}
        for k, e in enumerate(self.plan.ellipses):
            srcs, tgts = [], []
            for s, t in e.parallels:
                if isinstance(s, Var) and s.name in prepared["raised"][k]:
                    a = prepared["raised"][k][s.name]
                    s = np_contribution(Interpretation((a,), s), a)
                s, t = type_align(s, t)
                srcs.append(s)
                tgts.append(t)
            result = split_arrow(e.unknown.type)[1]
            new_type = arrow(*[type_of(s) for s in srcs], result)
            unknown = e.unknown
            if new_type != e.unknown.type:
                unknown = Var(e.unknown.name, new_type)
                old_params = split_arrow(e.unknown.type)[0]
                ys = [Var(f"_a{i}", pt) for i, pt in enumerate(old_params)]
                args = [raise_entity(y) if type_of(s) != y.type else y for s, y in zip(srcs, ys)]
                rewrites[e.unknown.name] = _lams(ys, apply(unknown, *args))
            sources.append(srcs)
            targets.append(tgts)
            names.append(e.name)
            links.append(prepared["links"][k])
            equations.append((unknown, srcs, prepared["sites"][k]))
        if rewrites:
            matrix = normalize(substitute_many(matrix, rewrites))
            pending = [Quant(a.det, a.var, normalize(substitute_many(a.restriction, rewrites))) for a in pending]
        unknown_vars = frozenset(u for u, _, _ in equations)
        eqs = [Equation(apply(u, *srcs), subterm_at(matrix, site), unknown_vars) for u, srcs, site in equations]
        problem = EllipsisProblem(eqs, sources, targets, matrix, links, names)
        return problem, pending

    def execute(self, prepared: dict, root_order: Sequence[Quant]):
        steps = list(prepared["steps"])
        steps.append("resolve " + ", ".join(e.name for e in self.plan.ellipses))
        steps.extend(f"discharge {a.label()}" for a in root_order)
        label = "; ".join(steps)
        self.branches.append(label)
        problem, pending = self.build_problem(prepared)
        result = resolve(problem, self.budget, self.linking, branch=label)
        self.counts.add(result.counts)
        self.failures.extend(result.failures)
        by_name = {a.var.name: a for a in pending}
        for res in result.resolutions:
            inst = {
                name: Quant(a.det, a.var, normalize(substitute_many(a.restriction, res.bindings)))
                for name, a in by_name.items()
            }
            interp = Interpretation(tuple(inst.values()), res.frame)
            try:
                for a in root_order:
                    interp = discharge_quant(interp, inst[a.var.name])
            except DischargeOrderViolation:
                continue
            for reading in readings_of([_Resolved(res.bindings, interp.matrix)]):
                self.readings.setdefault(alpha_key(reading.term), reading)


@dataclass
class _Resolved:
    bindings: dict
    frame: Term


def _lams(params, body):
    for p in reversed(params):
        body = Abs(p, body)
    return body


def enumerate_derivations(plan: DerivationPlan, budget: SearchBudget = DEFAULT_BUDGET, linking: bool = False) -> DerivationResult:
    """Readings from every legal order of discharges and ellipsis resolution."""
    return _Enumerator(plan, budget, linking).run()
