"""Solving term equations: Huet-style enumeration and second-order matching.

``huet_unify`` is a bounded version of Huet's pre-unification procedure
(SIMPL followed by imitation/projection branching).  ``ground_abstractions``
is the direct enumerator for ``P(s1, ..., sn) = s`` with ground arguments,
which replaces any subset of the occurrences of the ``si`` in ``s``.

Primary markers are carried through both: rigid-rigid comparison ignores
them, while imitation copies the rigid side's markers into the binding so
that solutions which keep a primary occurrence can be filtered afterwards.
"""

from __future__ import annotations

import itertools
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

from .errors import BudgetExhausted, NotSecondOrder, NotUnifiable, TypeMismatch
from .terms import (
    Abs,
    App,
    Const,
    PairC,
    Prim,
    Term,
    Var,
    alpha_key,
    apply,
    bound_names,
    children,
    core,
    free_vars,
    lams,
    normalize,
    occurs_free,
    rebuild,
    spine,
    split_arrow,
    strip,
    substitute_many,
    type_of,
    type_order,
)

META_PREFIX = "?"
_LOCAL_PREFIX = "_w"
_PARAM_PREFIX = "_y"


@dataclass(frozen=True)
class Equation:
    lhs: Term
    rhs: Term
    unknowns: frozenset = frozenset()

    def __post_init__(self):
        lt, rt = type_of(self.lhs), type_of(self.rhs)
        if lt != rt:
            raise TypeMismatch(f"equation sides have types {lt} and {rt}")
        object.__setattr__(self, "unknowns", frozenset(self.unknowns))

    @property
    def unknown_names(self) -> set[str]:
        return {v.name for v in self.unknowns}


@dataclass(frozen=True)
class SearchBudget:
    max_depth: int = 10
    max_solutions: int = 64

    def __post_init__(self):
        if self.max_depth <= 0 or self.max_solutions <= 0:
            raise ValueError("search budget values must be positive")


DEFAULT_BUDGET = SearchBudget()


class Substitution(Mapping):
    """Bindings for unknowns, plus any flex-flex pairs left unsolved."""

    def __init__(self, bindings: dict, constraints: Sequence[tuple[Term, Term]] = ()):
        self._bindings = dict(sorted(bindings.items(), key=lambda kv: kv[0].name))
        self.constraints = tuple(constraints)

    def __getitem__(self, var):
        if isinstance(var, str):
            for v, b in self._bindings.items():
                if v.name == var:
                    return b
            raise KeyError(var)
        return self._bindings[var]

    def __iter__(self):
        return iter(self._bindings)

    def __len__(self):
        return len(self._bindings)

    def key(self):
        return (
            tuple((v.name, alpha_key(b, keep_prim=True)) for v, b in self._bindings.items()),
            tuple((alpha_key(a), alpha_key(b)) for a, b in self.constraints),
        )

    def __eq__(self, other):
        return isinstance(other, Substitution) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def apply(self, t: Term) -> Term:
        return normalize(substitute_many(t, {v.name: b for v, b in self._bindings.items()}))

    def __repr__(self):
        from .render import render

        inner = ", ".join(f"{v.name} := {render(b)}" for v, b in self._bindings.items())
        return f"Substitution({inner})"


def occurs_check(v: Var, t: Term) -> bool:
    """True iff ``v`` occurs free in ``t``."""
    return occurs_free(v.name, t)


# -- Huet's procedure --------------------------------------------------------


@dataclass
class _Pair:
    left: Term
    right: Term
    type: object


class HuetSearch:
    """One bounded run of the procedure; iterate it to get unifiers.

    After iteration, ``truncated`` says whether the depth or solution cap cut
    the search short, and ``failure_reasons`` collects why branches died.
    """

    def __init__(self, equations: Sequence[Equation], budget: SearchBudget = DEFAULT_BUDGET):
        self.equations = list(equations)
        self.budget = budget
        self.unknowns: dict[str, Var] = {}
        for eq in self.equations:
            for v in sorted(eq.unknowns, key=lambda v: v.name):
                self.unknowns.setdefault(v.name, v)
        self.truncated = False
        self.failure_reasons: set[str] = set()
        self._counter = itertools.count(1)

    def _fresh(self, prefix, ty):
        return Var(f"{prefix}{next(self._counter)}", ty)

    def __iter__(self) -> Iterator[Substitution]:
        pairs = [_Pair(eq.lhs, eq.rhs, type_of(eq.lhs)) for eq in self.equations]
        metas = {name: 0 for name in self.unknowns}
        seen = set()
        for bindings, flexflex in self._search(pairs, {}, metas):
            sol = self._extract(bindings, flexflex)
            k = sol.key()
            if k in seen:
                continue
            seen.add(k)
            yield sol
            if len(seen) >= self.budget.max_solutions:
                self.truncated = True
                return

    def _search(self, pairs, bindings, metas):
        simplified = self._simplify(pairs, metas)
        if simplified is None:
            return
        flexrigid, flexflex = simplified
        if not flexrigid:
            yield bindings, flexflex
            return
        flex, rigid, ty = flexrigid[0]
        head = spine(flex)[0]
        if metas[head.name] >= self.budget.max_depth:
            self.truncated = True
            return
        rest = [_Pair(f, r, t) for f, r, t in flexrigid + flexflex]
        for binding, new_metas in self._match(flex, rigid, ty, metas):
            sub = {head.name: binding}
            new_pairs = [
                _Pair(
                    normalize(substitute_many(p.left, sub)),
                    normalize(substitute_many(p.right, sub)),
                    p.type,
                )
                for p in rest
            ]
            next_metas = {k: d for k, d in metas.items() if k != head.name}
            next_metas.update(new_metas)
            yield from self._search(new_pairs, {**bindings, head.name: binding}, next_metas)

    def _is_flex(self, head, metas):
        return isinstance(head, Var) and head.name in metas

    def _simplify(self, pairs, metas):
        work = list(pairs)
        flexrigid, flexflex = [], []
        while work:
            p = work.pop(0)
            left, right, ty = p.left, p.right, p.type
            params, base = split_arrow(ty)
            if params:
                ws = [self._fresh(_LOCAL_PREFIX, pt) for pt in params]
                left = normalize(apply(left, *ws))
                right = normalize(apply(right, *ws))
                ty = base
            if alpha_key(left) == alpha_key(right):
                continue
            lc, rc = core(left), core(right)
            if isinstance(lc, PairC) or isinstance(rc, PairC):
                if isinstance(lc, PairC) and isinstance(rc, PairC):
                    work[:0] = [
                        _Pair(lc.first, rc.first, ty.first),
                        _Pair(lc.second, rc.second, ty.second),
                    ]
                    continue
                other = rc if isinstance(lc, PairC) else lc
                if not self._is_flex(spine(other)[0], metas):
                    return None
            lh, largs, _ = spine(left)
            rh, rargs, _ = spine(right)
            lflex = self._is_flex(lh, metas) and not isinstance(lc, PairC)
            rflex = self._is_flex(rh, metas) and not isinstance(rc, PairC)
            if not lflex and not rflex:
                if not _same_head(lh, rh) or len(largs) != len(rargs):
                    self.failure_reasons.add("clash")
                    return None
                arg_types = split_arrow(type_of(lh))[0]
                work[:0] = [_Pair(a, b, at) for a, b, at in zip(largs, rargs, arg_types)]
            elif lflex and rflex:
                flexflex.append((left, right, ty))
            else:
                flex, rigid = (left, right) if lflex else (right, left)
                if self._rigid_occurs(flex, rigid, metas):
                    self.failure_reasons.add("occurs-check")
                    return None
                flexrigid.append((flex, rigid, ty))
        return flexrigid, flexflex

    def _rigid_occurs(self, flex, rigid, metas):
        """Rigid-path occurs check.

        Fails ``F(u) = t`` when ``F`` occurs in ``t`` beneath rigid heads only
        and every argument of every such occurrence, and of ``F`` itself, is
        an atom of base type.  Then ``|sF(u)| = |sF(v)|`` for any ``s``, while
        the right side strictly contains ``sF(v)``, so there is no unifier.
        """
        head, args, _ = spine(flex)
        occurrences = []
        self._collect_rigid(head.name, rigid, metas, occurrences)
        if not occurrences:
            return False
        return all(_base_atom(a) for a in args) and all(
            _base_atom(a) for occ in occurrences for a in occ
        )

    def _collect_rigid(self, name, t, metas, out):
        c = core(t)
        if isinstance(c, Abs):
            self._collect_rigid(name, c.body, metas, out)
            return
        if isinstance(c, PairC):
            self._collect_rigid(name, c.first, metas, out)
            self._collect_rigid(name, c.second, metas, out)
            return
        head, args, _ = spine(t)
        if isinstance(head, Var) and head.name in metas:
            if head.name == name:
                out.append(args)
            return
        for a in args:
            self._collect_rigid(name, a, metas, out)

    def _match(self, flex, rigid, ty, metas):
        head, _, _ = spine(flex)
        params, _ = split_arrow(head.type)
        depth = metas[head.name] + 1
        ys = [self._fresh(_PARAM_PREFIX, pt) for pt in params]

        def new_meta(result_type):
            from .terms import arrow

            ty_ = arrow(*params, result_type) if params else result_type
            return self._fresh(META_PREFIX + "H", ty_)

        rc = core(rigid)
        rhead, rargs, rflags = spine(rigid)
        if isinstance(rc, PairC):
            h1, h2 = new_meta(type_of(rc.first)), new_meta(type_of(rc.second))
            body = PairC(apply(h1, *ys), apply(h2, *ys))
            if isinstance(rigid, Prim):
                body = Prim(body)
            yield normalize(lams(ys, body)), {h1.name: depth, h2.name: depth}
        elif isinstance(rhead, Const) or (
            isinstance(rhead, Var)
            and not rhead.name.startswith(_LOCAL_PREFIX)
            and rhead.name not in metas
        ):
            arg_types = split_arrow(type_of(rhead))[0][: len(rargs)]
            hs = [new_meta(at) for at in arg_types]
            body = rebuild(rhead, [apply(h, *ys) for h in hs], rflags)
            yield normalize(lams(ys, body)), {h.name: depth for h in hs}
        for y in ys:
            yparams, yresult = split_arrow(y.type)
            if yresult != ty:
                continue
            hs = [new_meta(pt) for pt in yparams]
            body = apply(y, *[apply(h, *ys) for h in hs])
            yield normalize(lams(ys, body)), {h.name: depth for h in hs}

    def _extract(self, bindings, flexflex):
        def resolve(t):
            for _ in range(10_000):
                pending = {n: bindings[n] for n in free_vars(t) if n in bindings}
                if not pending:
                    return normalize(t)
                t = normalize(substitute_many(t, pending))
            raise RuntimeError("cyclic bindings")

        out = {}
        for name, var in self.unknowns.items():
            if name in bindings:
                out[var] = resolve(var)
        constraints = [(resolve(a), resolve(b)) for a, b, _ in flexflex]
        return Substitution(out, constraints)


def _same_head(a, b):
    if isinstance(a, Const) and isinstance(b, Const):
        return a.name == b.name and a.type == b.type
    if isinstance(a, Var) and isinstance(b, Var):
        return a.name == b.name
    return False


def _base_atom(t):
    c = core(t)
    return isinstance(c, (Var, Const)) and not split_arrow(c.type)[0]


def huet_unify(
    equations: Sequence[Equation], budget: SearchBudget = DEFAULT_BUDGET
) -> Iterator[Substitution]:
    """Lazily enumerate unifiers of a system of equations.

    Raises ``NotUnifiable`` when the (finite) search space holds no unifier
    and ``BudgetExhausted`` when nothing was found but the depth bound cut
    some branch off.
    """
    search = HuetSearch(equations, budget)
    found = False
    for sol in search:
        found = True
        yield sol
    if not found:
        if search.truncated:
            raise BudgetExhausted("search depth exhausted without a unifier")
        reason = "occurs-check" if "occurs-check" in search.failure_reasons else "clash"
        raise NotUnifiable("no unifier exists", reason=reason)


# -- ground second-order matching --------------------------------------------


def ground_abstractions(unknown: Var, args: Sequence[Term], rhs: Term) -> list[Substitution]:
    """All ``lam x1..xn. s'`` where ``s'`` is ``rhs`` with some occurrences
    of the ``args`` replaced by the matching ``xi``.

    An occurrence nested inside a replaced occurrence disappears with it, so
    the result has at most ``2**c`` members for ``c`` occurrences.
    """
    avoid = set(free_vars(rhs)) | bound_names(rhs)
    for a in args:
        avoid |= set(free_vars(a))
    params = []
    for i, a in enumerate(args, start=1):
        name = f"u{i}"
        while name in avoid:
            name += "'"
        avoid.add(name)
        params.append(Var(name, type_of(a)))
    keys = [alpha_key(a) for a in args]

    def alts(node, bound):
        c = core(node)
        options = []
        for kid in _child_alternatives(c, bound):
            options.append(Prim(kid) if isinstance(node, Prim) else kid)
        if not (set(free_vars(c)) & bound):
            k = alpha_key(c)
            options.extend(p for p, pk in zip(params, keys) if pk == k)
        return options

    def _child_alternatives(c, bound):
        if isinstance(c, App):
            return [App(f, a) for f in alts(c.fun, bound) for a in alts(c.arg, bound)]
        if isinstance(c, PairC):
            return [PairC(f, s) for f in alts(c.first, bound) for s in alts(c.second, bound)]
        if isinstance(c, Abs):
            return [Abs(c.var, b) for b in alts(c.body, bound | {c.var.name})]
        return [c]

    out, seen = [], set()
    for body in alts(rhs, frozenset()):
        sub = Substitution({unknown: normalize(lams(params, body))})
        if sub.key() not in seen:
            seen.add(sub.key())
            out.append(sub)
    return out


def second_order_match(equation: Equation, budget: SearchBudget = DEFAULT_BUDGET) -> list[Substitution]:
    """The complete, finite set of matchers of a second-order matching problem.

    Ground arguments that are not abstractions go through
    :func:`ground_abstractions`; anything else is handed to the general
    procedure, which terminates on matching problems.
    """
    names = equation.unknown_names
    head, args, _ = spine(equation.lhs)
    if not (isinstance(head, Var) and head.name in names):
        raise NotSecondOrder("left side is not an unknown applied to arguments")
    if set(free_vars(equation.rhs)) & names:
        raise NotSecondOrder("right side mentions an unknown")
    for v in equation.unknowns:
        if type_order(v.type) > 2:
            raise NotSecondOrder(f"{v.name} has order {type_order(v.type)}")
    ground = all(not (set(free_vars(a)) & names) for a in args)
    if ground and not any(isinstance(core(a), Abs) for a in args):
        return ground_abstractions(head, args, equation.rhs)
    try:
        return list(huet_unify([equation], budget))
    except NotUnifiable:
        return []


def is_ground_problem(equation: Equation) -> bool:
    names = equation.unknown_names
    head, args, _ = spine(equation.lhs)
    return (
        isinstance(head, Var)
        and head.name in names
        and not (set(free_vars(equation.rhs)) & names)
        and all(not (set(free_vars(a)) & names) for a in args)
        and not any(isinstance(core(a), Abs) for a in args)
        and type_order(head.type) <= 2
    )


def solve_equation(equation: Equation, budget: SearchBudget = DEFAULT_BUDGET) -> list[Substitution]:
    """Matchers via the ground enumerator when it applies, else Huet."""
    if is_ground_problem(equation):
        head, args, _ = spine(equation.lhs)
        return ground_abstractions(head, args, equation.rhs)
    return list(huet_unify([equation], budget))


def is_instance(specific: Term, general: Term) -> bool:
    """Whether ``specific`` is obtained from ``general`` by instantiating its
    free metavariables (names starting with ``?``)."""
    metas = {v for n, v in free_vars(general).items() if n.startswith(META_PREFIX)}
    if not metas:
        return alpha_key(strip(specific)) == alpha_key(strip(general))
    try:
        next(iter(huet_unify([Equation(general, specific, frozenset(metas))])))
        return True
    except (NotUnifiable, BudgetExhausted, StopIteration):
        return False


def children_paths(t: Term):
    return [i for i, _ in children(t)]
