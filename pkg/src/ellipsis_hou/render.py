"""Canonical text for terms, and a reader for that text.

Bound variables are renamed ``x1, x2, ...`` in binding order, applications
print as ``f(a, b)``, pairs as ``<a, b>``, primary occurrences as ``{a}``,
and a pair quantifier applied to ``lam x. <r, s>`` prints in the
``q(x, r, s)`` abbreviation.
"""

from __future__ import annotations

import re

from .errors import DslSyntaxError, TypeMismatch, UnknownConstant
from .terms import (
    Abs,
    App,
    Const,
    E,
    Env,
    Func,
    PairC,
    PairT,
    Prim,
    T,
    Term,
    Type,
    Var,
    PAIR_PROJECTIONS,
    free_vars,
    fst_const,
    snd_const,
    render_type,
    spine,
    type_of,
)


def is_pair_quantifier_type(ty: Type) -> bool:
    return (
        isinstance(ty, Func)
        and isinstance(ty.domain, Func)
        and isinstance(ty.domain.codomain, PairT)
        and ty.codomain == T
    )


def render(t: Term) -> str:
    taken = set(free_vars(t))
    return _Renderer(taken).term(t, {})


class _Renderer:
    def __init__(self, taken):
        self.taken = taken
        self.counter = 0

    def fresh(self):
        while True:
            self.counter += 1
            name = f"x{self.counter}"
            if name not in self.taken:
                return name

    def term(self, t, names):
        if isinstance(t, Var):
            return names.get(t.name, t.name)
        if isinstance(t, Const):
            return t.name
        if isinstance(t, Prim):
            return "{" + self.term(t.inner, names) + "}"
        if isinstance(t, PairC):
            return f"<{self.term(t.first, names)}, {self.term(t.second, names)}>"
        if isinstance(t, Abs):
            name = self.fresh()
            body = self.term(t.body, {**names, t.var.name: name})
            return f"lam {name}:{render_type(t.var.type)}. {body}"
        if isinstance(t, App):
            head, args, flags = spine(t)
            if (
                len(args) == 1
                and not any(flags)
                and isinstance(head, Const)
                and is_pair_quantifier_type(head.type)
                and isinstance(args[0], Abs)
                and isinstance(args[0].body, PairC)
            ):
                lam = args[0]
                name = self.fresh()
                inner = {**names, lam.var.name: name}
                r = self.term(lam.body.first, inner)
                s = self.term(lam.body.second, inner)
                return f"{head.name}({name}, {r}, {s})"
            if any(flags[1:-1]):
                # a Prim wrapper on a partial application: print one level at a time
                return f"{self.atom(t.fun, names)}({self.term(t.arg, names)})"
            fun = self.atom(head, names)
            if flags[0]:
                fun = "{" + fun + "}"
            return f"{fun}({', '.join(self.term(a, names) for a in args)})"
        raise TypeError(t)

    def atom(self, t, names):
        text = self.term(t, names)
        if isinstance(t, Abs):
            return f"({text})"
        return text


# -- reading rendered text ---------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<arrow>->)|(?P<punct>[(),.<>{}:*])|(?P<name>[^\s(),.<>{}:*]+))"
)


def _tokenize(text):
    pos = 0
    out = []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise DslSyntaxError(f"unexpected character {text[pos]!r}", 1, pos + 1)
        kind = m.lastgroup
        out.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    out.append(("eof", "", len(text)))
    return out


class _Reader:
    def __init__(self, text, env, variables):
        self.toks = _tokenize(text)
        self.i = 0
        self.env = env
        self.vars = dict(variables or {})

    def peek(self):
        return self.toks[self.i][1] if self.toks[self.i][0] != "eof" else None

    def take(self, expected=None):
        kind, val, pos = self.toks[self.i]
        if expected is not None and val != expected:
            raise DslSyntaxError(f"expected {expected!r}, found {val!r}", 1, pos + 1)
        if kind == "eof":
            raise DslSyntaxError("unexpected end of input", 1, pos + 1)
        self.i += 1
        return val

    def type(self):
        left = self.prod()
        if self.peek() == "->":
            self.take()
            return Func(left, self.type())
        return left

    def prod(self):
        left = self.type_atom()
        if self.peek() == "*":
            self.take()
            return PairT(left, self.type_atom())
        return left

    def type_atom(self):
        tok = self.take()
        if tok == "e":
            return E
        if tok == "t":
            return T
        if tok == "(":
            ty = self.type()
            self.take(")")
            return ty
        raise DslSyntaxError(f"bad type token {tok!r}", 1, self.toks[self.i - 1][2] + 1)

    def term(self, scope):
        if self.peek() == "lam":
            self.take()
            name = self.take()
            self.take(":")
            ty = self.type()
            self.take(".")
            v = Var(name, ty)
            return Abs(v, self.term({**scope, name: v}))
        return self.application(scope)

    def application(self, scope):
        pos = self.toks[self.i][2]
        head_tok = self.peek()
        if head_tok in PAIR_PROJECTIONS and head_tok not in scope and head_tok not in self.vars:
            self.take()
            self.take("(")
            arg = self.term(scope)
            self.take(")")
            ty = type_of(arg)
            if not isinstance(ty, PairT):
                raise DslSyntaxError(f"{head_tok} of non-pair", 1, pos + 1)
            proj = fst_const(ty) if head_tok == "fst" else snd_const(ty)
            head = App(proj, arg)
        else:
            head = self.atom(scope)
        while self.peek() == "(":
            self.take("(")
            if (
                isinstance(head, Const)
                and is_pair_quantifier_type(head.type)
                and self._looks_like_binder(scope)
            ):
                name = self.take()
                self.take(",")
                v = Var(name, head.type.domain.domain)
                inner = {**scope, name: v}
                r = self.term(inner)
                self.take(",")
                s = self.term(inner)
                self.take(")")
                head = App(head, Abs(v, PairC(r, s)))
                continue
            args = [self.term(scope)]
            while self.peek() == ",":
                self.take()
                args.append(self.term(scope))
            self.take(")")
            for a in args:
                head = App(head, a)
        try:
            type_of(head)
        except TypeMismatch as exc:
            raise DslSyntaxError(f"ill-typed application of {head_tok}: {exc}", 1, pos + 1)
        return head

    def _looks_like_binder(self, scope):
        kind, val, _ = self.toks[self.i]
        nxt = self.toks[self.i + 1][1]
        return kind == "name" and nxt == "," and val not in self.env and val not in scope

    def atom(self, scope):
        tok = self.peek()
        if tok == "{":
            self.take()
            inner = self.term(scope)
            self.take("}")
            return Prim(inner)
        if tok == "<":
            self.take()
            a = self.term(scope)
            self.take(",")
            b = self.term(scope)
            self.take(">")
            return PairC(a, b)
        if tok == "(":
            self.take()
            inner = self.term(scope)
            self.take(")")
            return inner
        name = self.take()
        if name in scope:
            return scope[name]
        if name in self.vars:
            return self.vars[name]
        if name in self.env:
            return self.env.const(name)
        raise UnknownConstant(name)


def read_rendered(text: str, env: Env, variables=None) -> Term:
    """Parse canonical text back into a term.

    ``variables`` maps names of free variables to ``Var`` objects.
    """
    reader = _Reader(text, env, variables)
    t = reader.term({})
    if reader.toks[reader.i][0] != "eof":
        kind, val, pos = reader.toks[reader.i]
        raise DslSyntaxError(f"trailing input {val!r}", 1, pos + 1)
    return t


__all__ = ["render", "read_rendered", "is_pair_quantifier_type"]
