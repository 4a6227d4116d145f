"""The problem-file language.

A problem file is one s-expression::

    (problem wife
      (title "Dan likes his wife, and George does too")
      (decl likes (-> e e t))
      (decl wife-of (-> e e))
      (decl dan e)
      (decl george e)
      (unknown P (-> e t))
      (frame (P george))
      (ellipsis P
        (source (likes (prim dan) (wife-of dan)))
        (parallel dan george))
      (expect (likes george (wife-of dan))
              (likes george (wife-of george))))

Terms are written with n-ary application ``(f a b)``, ``(app f a)``,
``(lam x TYPE body)``, ``(pair a b)``, ``(prim a)``, ``(fst p)``, ``(snd p)``
and the quantifier form ``(every x restriction scope)`` for any constant of
pair-quantifier type.  Types are ``e``, ``t``, ``(-> a b ...)`` and
``(* a b)``.

Occurrence selectors ``(occ STEP ...)`` name paths.  A step ``(f k)`` goes to
the k-th argument of an application headed by ``f``; ``(lam)`` enters a
lambda body, ``(pair k)`` a pair component, ``(restr)`` and ``(scope)`` the
two halves of a quantified term, and a bare integer is a raw binary step.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .ellipsis import EllipsisProblem, type_align
from .errors import DslSyntaxError, EllipsisError, TypeMismatch, UnknownConstant, UnresolvedSelector
from .render import is_pair_quantifier_type, render
from .scope import DerivationPlan, Interpretation, PendingEllipsis, Quant
from .terms import (
    E,
    T,
    Abs,
    App,
    Env,
    Func,
    PairC,
    PairT,
    Prim,
    Term,
    Var,
    apply,
    arrow,
    core,
    free_vars,
    fst_const,
    snd_const,
    spine,
    strip,
    subterm_at,
    type_of,
)
from .unify import DEFAULT_BUDGET, Equation, SearchBudget


# -- s-expressions -----------------------------------------------------------


class Atom(str):
    line: int = 0
    column: int = 0


class SList(list):
    line: int = 0
    column: int = 0


class QuotedString(Atom):
    pass


_TOKEN = re.compile(r'\s+|;[^\n]*|(?P<open>\()|(?P<close>\))|"(?P<str>[^"]*)"|(?P<atom>[^\s()";]+)')


def read_sexprs(text: str) -> list:
    """All top-level s-expressions in ``text``, with source positions."""
    stack: list = [SList()]
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise DslSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        col = pos - line_start + 1
        if m.group("open"):
            node = SList()
            node.line, node.column = line, col
            stack.append(node)
        elif m.group("close"):
            if len(stack) == 1:
                raise DslSyntaxError("unbalanced ')'", line, col)
            node = stack.pop()
            stack[-1].append(node)
        elif m.group("str") is not None:
            a = QuotedString(m.group("str"))
            a.line, a.column = line, col
            stack[-1].append(a)
        elif m.group("atom"):
            a = Atom(m.group("atom"))
            a.line, a.column = line, col
            stack[-1].append(a)
        chunk = m.group(0)
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = pos + chunk.rfind("\n") + 1
        pos = m.end()
    if len(stack) != 1:
        open_node = stack[-1]
        raise DslSyntaxError("unclosed '('", open_node.line, open_node.column)
    return list(stack[0])


def _where(x) -> tuple:
    return getattr(x, "line", 0), getattr(x, "column", 0)


def _syntax(msg, x):
    return DslSyntaxError(msg, *_where(x))


def _show(x) -> str:
    if isinstance(x, SList):
        return "(" + " ".join(_show(y) for y in x) + ")"
    return str(x)


# -- problem files -----------------------------------------------------------


@dataclass
class EllipsisDecl:
    unknown: Var
    source: Optional[Term]
    site: Optional[tuple]
    parallels: list
    links: list = field(default_factory=list)


@dataclass
class ProblemFile:
    name: str
    title: str = ""
    env: Env = field(default_factory=Env)
    unknowns: dict = field(default_factory=dict)
    variables: dict = field(default_factory=dict)
    assumptions: list = field(default_factory=list)
    frame: Optional[Term] = None
    ellipses: list = field(default_factory=list)
    linking: bool = False
    budget: SearchBudget = DEFAULT_BUDGET
    expected: dict = field(default_factory=dict)
    expected_bindings: list = field(default_factory=list)
    exploratory: bool = False

    def expectation(self, linking: bool) -> Optional[list]:
        if linking in self.expected:
            return self.expected[linking]
        return self.expected.get(None)

    @property
    def is_derivation(self) -> bool:
        return bool(self.assumptions)

    def source_of(self, decl: EllipsisDecl) -> Term:
        return decl.source if decl.source is not None else subterm_at(self.frame, decl.site)

    def to_problem(self) -> EllipsisProblem:
        equations, sources, targets, links, names = [], [], [], [], []
        all_unknowns = frozenset(self.unknowns.values())
        for d in self.ellipses:
            pairs = [type_align(s, t) for s, t in d.parallels]
            srcs = [s for s, _ in pairs]
            equations.append(Equation(apply(d.unknown, *srcs), self.source_of(d), all_unknowns))
            sources.append(srcs)
            targets.append([t for _, t in pairs])
            links.append(list(d.links))
            names.append(d.unknown.name)
        return EllipsisProblem(equations, sources, targets, self.frame, links, names)

    def to_plan(self) -> DerivationPlan:
        pending = []
        for d in self.ellipses:
            if d.site is None:
                raise UnresolvedSelector(f"ellipsis {d.unknown.name} needs a site when assumptions are present")
            pending.append(PendingEllipsis(d.unknown, d.site, list(d.parallels), list(d.links)))
        return DerivationPlan(Interpretation(tuple(self.assumptions), self.frame), pending)


class _Elaborator:
    def __init__(self):
        self.pf: Optional[ProblemFile] = None

    # types
    def type(self, x):
        if isinstance(x, Atom):
            if x == "e":
                return E
            if x == "t":
                return T
            raise _syntax(f"unknown type {x!r}", x)
        if not x:
            raise _syntax("empty type", x)
        head = x[0]
        if head == "->" and len(x) >= 3:
            return arrow(*[self.type(y) for y in x[1:]])
        if head == "*" and len(x) == 3:
            return PairT(self.type(x[1]), self.type(x[2]))
        raise _syntax(f"malformed type {_show(x)}", x)

    # terms
    def lookup(self, name, scope):
        if name in scope:
            return scope[name]
        if name in self.pf.variables:
            return self.pf.variables[name]
        if name in self.pf.unknowns:
            return self.pf.unknowns[name]
        if name in self.pf.env:
            return self.pf.env.const(name)
        line, col = _where(name)
        raise UnknownConstant(f"unknown name {name!r} (line {line}, column {col})")

    def term(self, x, scope=None):
        scope = scope or {}
        t = self._term(x, scope)
        try:
            type_of(t)
        except TypeMismatch as exc:
            line, col = _where(x)
            raise TypeMismatch(f"ill-typed term {_show(x)} at line {line}, column {col}: {exc}") from None
        return t

    def _term(self, x, scope):
        if isinstance(x, QuotedString):
            raise _syntax("string where a term was expected", x)
        if isinstance(x, Atom):
            return self.lookup(x, scope)
        if not x:
            raise _syntax("empty term", x)
        head = x[0]
        if head == "lam" and not (isinstance(head, Atom) and head in scope):
            if len(x) != 4 or not isinstance(x[1], Atom):
                raise _syntax("expected (lam NAME TYPE BODY)", x)
            v = Var(str(x[1]), self.type(x[2]))
            return Abs(v, self.term(x[3], {**scope, str(x[1]): v}))
        if head == "app":
            if len(x) < 3:
                raise _syntax("expected (app F ARG ...)", x)
            return apply(self.term(x[1], scope), *[self.term(y, scope) for y in x[2:]])
        if head == "pair":
            if len(x) != 3:
                raise _syntax("expected (pair A B)", x)
            return PairC(self.term(x[1], scope), self.term(x[2], scope))
        if head == "prim":
            if len(x) != 2:
                raise _syntax("expected (prim TERM)", x)
            return Prim(self.term(x[1], scope))
        if head in ("fst", "snd") and head not in scope:
            if len(x) != 2:
                raise _syntax(f"expected ({head} TERM)", x)
            arg = self.term(x[1], scope)
            ty = type_of(arg)
            if not isinstance(ty, PairT):
                raise TypeMismatch(f"{head} of non-pair {render(arg)} at line {x.line}, column {x.column}")
            return App(fst_const(ty) if head == "fst" else snd_const(ty), arg)
        fun = self.term(head, scope)
        if (
            len(x) == 4
            and not isinstance(core(fun), Var)
            and is_pair_quantifier_type(type_of(fun))
            and isinstance(x[1], Atom)
        ):
            v = Var(str(x[1]), type_of(fun).domain.domain)
            inner = {**scope, str(x[1]): v}
            return App(fun, Abs(v, PairC(self.term(x[2], inner), self.term(x[3], inner))))
        if len(x) == 1:
            raise _syntax(f"application of {_show(head)} to nothing", x)
        return apply(fun, *[self.term(y, scope) for y in x[1:]])

    # selectors
    def selector(self, x, root: Term) -> tuple:
        if not (isinstance(x, SList) and x and x[0] == "occ"):
            raise _syntax("expected (occ STEP ...)", x)
        path: tuple = ()
        node = root
        for step in x[1:]:
            path, node = self._step(step, path, node, x)
        return path

    def _step(self, step, path, node, sel):
        c = core(node)
        fail = lambda why: UnresolvedSelector(
            f"selector {_show(sel)} at line {sel.line}, column {sel.column}: {why}"
        )
        if isinstance(step, Atom) and re.fullmatch(r"\d+", step):
            i = int(step)
            if isinstance(c, App):
                kids = {0: c.fun, 1: c.arg}
            elif isinstance(c, PairC):
                kids = {0: c.first, 1: c.second}
            elif isinstance(c, Abs):
                kids = {0: c.body}
            else:
                kids = {}
            if i not in kids:
                raise fail(f"no child {i} at {render(c)}")
            return path + (i,), kids[i]
        if not isinstance(step, SList) or not step:
            raise fail(f"bad step {_show(step)}")
        kind = step[0]
        if kind == "lam":
            if not isinstance(c, Abs):
                raise fail(f"{render(c)} is not an abstraction")
            return path + (0,), c.body
        if kind == "pair":
            if not isinstance(c, PairC) or len(step) != 2 or step[1] not in ("1", "2"):
                raise fail(f"{render(c)} is not a pair or bad index")
            return (path + (0,), c.first) if step[1] == "1" else (path + (1,), c.second)
        if kind in ("restr", "scope"):
            head, args, _ = spine(c)
            if len(args) != 1 or not isinstance(core(args[0]), Abs) or not isinstance(core(core(args[0]).body), PairC):
                raise fail(f"{render(c)} is not a quantified term")
            pair = core(core(args[0]).body)
            return (path + (1, 0, 0), pair.first) if kind == "restr" else (path + (1, 0, 1), pair.second)
        if len(step) != 2 or not re.fullmatch(r"\d+", step[1]):
            raise fail(f"bad step {_show(step)}")
        head, args, _ = spine(node)
        k = int(step[1])
        name = getattr(head, "name", None)
        if name != kind or not 1 <= k <= len(args):
            raise fail(f"no argument {k} of {kind} at {render(c)}")
        return path + (0,) * (len(args) - k) + (1,), args[k - 1]

    # the file
    def problem(self, x) -> ProblemFile:
        if not (isinstance(x, SList) and len(x) >= 2 and x[0] == "problem" and isinstance(x[1], Atom)):
            raise _syntax("expected (problem NAME ...)", x)
        pf = ProblemFile(name=str(x[1]))
        self.pf = pf
        ellipsis_forms = []
        expect_forms = []
        flags = {}
        for form in x[2:]:
            if not isinstance(form, SList) or not form:
                raise _syntax(f"unexpected {_show(form)}", form)
            kw = form[0]
            if kw == "title":
                pf.title = " ".join(str(a) for a in form[1:])
            elif kw == "exploratory":
                pf.exploratory = True
            elif kw in ("decl", "unknown", "var"):
                if len(form) != 3 or not isinstance(form[1], Atom):
                    raise _syntax(f"expected ({kw} NAME TYPE)", form)
                name, ty = str(form[1]), self.type(form[2])
                if kw == "decl":
                    try:
                        pf.env.declare(name, ty)
                    except EllipsisError as exc:
                        raise _syntax(str(exc), form) from None
                elif kw == "unknown":
                    pf.unknowns[name] = Var(name, ty)
                else:
                    pf.variables[name] = Var(name, ty)
            elif kw == "assume":
                pf.assumptions.append(self.assumption(form))
            elif kw in ("frame", "matrix"):
                if len(form) != 2:
                    raise _syntax(f"expected ({kw} TERM)", form)
                pf.frame = self.term(form[1])
            elif kw == "ellipsis":
                ellipsis_forms.append(form)
            elif kw == "flags":
                flags.update(self.flags(form))
            elif kw == "expect":
                expect_forms.append(form)
            elif kw == "expect-binding":
                if len(form) != 3 or form[1] not in pf.unknowns:
                    raise _syntax("expected (expect-binding UNKNOWN TERM)", form)
                pf.expected_bindings.append((str(form[1]), self.term(form[2])))
            else:
                raise _syntax(f"unknown form {kw!r}", form)
        if pf.frame is None:
            raise _syntax("missing (frame TERM)", x)
        if type_of(pf.frame) != T:
            raise TypeMismatch(f"frame of {pf.name} has type {type_of(pf.frame)}, expected t")
        for form in ellipsis_forms:
            pf.ellipses.append(self.ellipsis(form))
        for form in expect_forms:
            self.expect(form)
        pf.linking = flags.get("linking", False)
        pf.budget = SearchBudget(flags.get("depth", DEFAULT_BUDGET.max_depth),
                                 flags.get("max-solutions", DEFAULT_BUDGET.max_solutions))
        return pf

    def assumption(self, form):
        if len(form) != 2 or not isinstance(form[1], SList) or not form[1]:
            raise _syntax("expected (assume (quant DET VAR RESTRICTION))", form)
        body = form[1]
        if body[0] == "quant" and len(body) == 4:
            var = self.pf.variables.get(body[2])
            if var is None:
                raise _syntax(f"assumption variable {body[2]!r} must be declared with (var ...)", body)
            try:
                return Quant(self.term(body[1]), var, self.term(body[3]))
            except TypeMismatch as exc:
                raise TypeMismatch(f"{exc} (line {body.line}, column {body.column})") from None
        if body[0] == "bind":
            raise _syntax("bind assumptions are not supported in problem files", body)
        raise _syntax(f"malformed assumption {_show(body)}", body)

    def ellipsis(self, form):
        if len(form) < 3 or form[1] not in self.pf.unknowns:
            raise _syntax("expected (ellipsis UNKNOWN ...) naming a declared unknown", form)
        unknown = self.pf.unknowns[form[1]]
        source = site = None
        parallels, link_forms = [], []
        for item in form[2:]:
            if not isinstance(item, SList) or not item:
                raise _syntax(f"unexpected {_show(item)}", item)
            if item[0] == "source" and len(item) == 2:
                source = self.term(item[1])
            elif item[0] == "site" and len(item) == 2:
                site = self.selector(item[1], self.pf.frame)
            elif item[0] == "parallel" and len(item) == 3:
                parallels.append((self.term(item[1]), self.term(item[2])))
            elif item[0] == "link" and len(item) == 3:
                link_forms.append(item)
            else:
                raise _syntax(f"malformed ellipsis clause {_show(item)}", item)
        if (source is None) == (site is None):
            raise _syntax("an ellipsis needs exactly one of (source ...) or (site ...)", form)
        if not parallels:
            raise _syntax("an ellipsis needs at least one (parallel SRC TGT)", form)
        decl = EllipsisDecl(unknown, source, site, parallels)
        rhs = self.pf.source_of(decl)
        if type_of(rhs) != T:
            raise TypeMismatch(f"source of {unknown.name} is not of type t")
        decl.links = [(self.selector(f[1], rhs), self.selector(f[2], rhs)) for f in link_forms]
        return decl

    def flags(self, form):
        out = {}
        for item in form[1:]:
            if not isinstance(item, SList) or len(item) != 2:
                raise _syntax(f"malformed flag {_show(item)}", item)
            key, val = item[0], item[1]
            if key == "linking":
                if val not in ("on", "off"):
                    raise _syntax("linking must be on or off", item)
                out["linking"] = val == "on"
            elif key in ("depth", "max-solutions"):
                if not re.fullmatch(r"[1-9]\d*", val):
                    raise _syntax(f"{key} must be a positive integer", item)
                out[str(key)] = int(val)
            else:
                raise _syntax(f"unknown flag {key!r}", item)
        return out

    def expect(self, form):
        items = list(form[1:])
        mode = None
        if items and isinstance(items[0], SList) and items[0] and items[0][0] == "linking":
            sel = items.pop(0)
            if len(sel) != 2 or sel[1] not in ("on", "off"):
                raise _syntax("expected (linking on|off)", sel)
            mode = sel[1] == "on"
        terms = []
        for item in items:
            t = self.term(item)
            if free_vars(t) or type_of(t) != T:
                raise TypeMismatch(f"expected reading {_show(item)} must be closed and of type t")
            terms.append(strip(t))
        self.pf.expected.setdefault(mode, []).extend(terms)


def parse_problem(text: str) -> ProblemFile:
    forms = read_sexprs(text)
    if len(forms) != 1:
        where = forms[1] if len(forms) > 1 else None
        raise DslSyntaxError("a problem file holds exactly one (problem ...) form", *_where(where))
    return _Elaborator().problem(forms[0])


def parse_term(text: str, pf: ProblemFile) -> Term:
    """Parse one term in the vocabulary of an existing problem file."""
    forms = read_sexprs(text)
    if len(forms) != 1:
        raise DslSyntaxError("expected exactly one term", 1, 1)
    el = _Elaborator()
    el.pf = pf
    return el.term(forms[0])
