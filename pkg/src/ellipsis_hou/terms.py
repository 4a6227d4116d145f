"""Typed lambda terms with pairing and primary-occurrence markers.

Terms are immutable.  Bound variables carry names, and alpha-equivalence is
decided through a de Bruijn-style key (:func:`alpha_key`), so comparison and
deduplication of readings is structural.

A ``Prim`` node wraps a subterm that is a primary occurrence of a parallel
element.  It is transparent to typing, normalization and alpha-equivalence,
but substitution and traversal carry it along.  Occurrence paths skip
``Prim`` nodes: a path is a tuple of child indices over the remaining nodes
(``App``: 0 = function, 1 = argument; ``Abs``: 0 = body; ``PairC``:
0 = first, 1 = second).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

from .errors import EllipsisError, TypeMismatch, UnknownConstant

Path = tuple[int, ...]


# -- types -------------------------------------------------------------------


class Type:
    __slots__ = ()

    def __str__(self):
        return render_type(self)


@dataclass(frozen=True, repr=False)
class Entity(Type):
    def __repr__(self):
        return "e"


@dataclass(frozen=True, repr=False)
class Truth(Type):
    def __repr__(self):
        return "t"


@dataclass(frozen=True)
class Func(Type):
    domain: Type
    codomain: Type

    def __str__(self):
        return render_type(self)


@dataclass(frozen=True)
class PairT(Type):
    first: Type
    second: Type

    def __str__(self):
        return render_type(self)


E = Entity()
T = Truth()


def arrow(*types: Type) -> Type:
    """``arrow(a, b, c)`` is ``a -> (b -> c)``."""
    result = types[-1]
    for ty in reversed(types[:-1]):
        result = Func(ty, result)
    return result


def split_arrow(ty: Type) -> tuple[list[Type], Type]:
    params = []
    while isinstance(ty, Func):
        params.append(ty.domain)
        ty = ty.codomain
    return params, ty


def type_order(ty: Type) -> int:
    """Order with base types at 0: ``e -> t`` is 1, ``(e -> t) -> t`` is 2."""
    if isinstance(ty, Func):
        return max(type_order(ty.domain) + 1, type_order(ty.codomain))
    if isinstance(ty, PairT):
        return max(type_order(ty.first), type_order(ty.second))
    return 0


def render_type(ty: Type) -> str:
    if isinstance(ty, Entity):
        return "e"
    if isinstance(ty, Truth):
        return "t"
    if isinstance(ty, Func):
        return f"{_type_atom(ty.domain)} -> {render_type(ty.codomain)}"
    if isinstance(ty, PairT):
        return f"{_type_atom(ty.first)} * {_type_atom(ty.second)}"
    raise TypeError(ty)


def _type_atom(ty):
    if isinstance(ty, (Func, PairT)):
        return f"({render_type(ty)})"
    return render_type(ty)


PROPERTY = arrow(E, T)
GQ = arrow(PROPERTY, T)
PAIR_QUANT = arrow(Func(E, PairT(T, T)), T)


# -- terms -------------------------------------------------------------------


class Term:
    __slots__ = ()

    def __str__(self):
        from .render import render

        return render(self)


@dataclass(frozen=True)
class Var(Term):
    name: str
    type: Type


@dataclass(frozen=True)
class Const(Term):
    name: str
    type: Type


@dataclass(frozen=True)
class Abs(Term):
    var: Var
    body: Term


@dataclass(frozen=True)
class App(Term):
    fun: Term
    arg: Term


@dataclass(frozen=True)
class PairC(Term):
    first: Term
    second: Term


@dataclass(frozen=True)
class Prim(Term):
    inner: Term


def apply(fun: Term, *args: Term) -> Term:
    for a in args:
        fun = App(fun, a)
    return fun


def lams(params: Sequence[Var], body: Term) -> Term:
    for v in reversed(params):
        body = Abs(v, body)
    return body


def fst_const(ty: PairT) -> Const:
    return Const("fst", Func(ty, ty.first))


def snd_const(ty: PairT) -> Const:
    return Const("snd", Func(ty, ty.second))


def and_const() -> Const:
    return Const("and", arrow(T, T, T))


BUILTINS = {
    "Δ": E,
    "and": arrow(T, T, T),
}
PAIR_PROJECTIONS = ("fst", "snd")


class Env:
    """Constant declarations.  Each name is declared at most once."""

    def __init__(self, decls=None):
        self._decls: dict[str, Type] = dict(BUILTINS)
        for name, ty in (decls or {}).items():
            self.declare(name, ty)

    def declare(self, name: str, ty: Type) -> Const:
        if name in self._decls or name in PAIR_PROJECTIONS:
            raise EllipsisError(f"constant {name!r} declared twice")
        self._decls[name] = ty
        return Const(name, ty)

    def const(self, name: str) -> Const:
        if name not in self._decls:
            raise UnknownConstant(name)
        return Const(name, self._decls[name])

    def __contains__(self, name):
        return name in self._decls

    def __getitem__(self, name):
        return self._decls[name]

    def items(self):
        return self._decls.items()


# -- typing ------------------------------------------------------------------


def type_of(t: Term) -> Type:
    """Type of a term whose variables and constants carry their types."""
    if isinstance(t, (Var, Const)):
        return t.type
    if isinstance(t, Prim):
        return type_of(t.inner)
    if isinstance(t, Abs):
        return Func(t.var.type, type_of(t.body))
    if isinstance(t, PairC):
        return PairT(type_of(t.first), type_of(t.second))
    if isinstance(t, App):
        fty = type_of(t.fun)
        aty = type_of(t.arg)
        if not isinstance(fty, Func):
            raise TypeMismatch(f"applying non-function of type {fty}")
        if fty.domain != aty:
            raise TypeMismatch(f"argument of type {aty} where {fty.domain} expected")
        return fty.codomain
    raise TypeError(t)


def typecheck(t: Term, env: Env) -> Type:
    for _, node in iter_nodes(t):
        node = core(node)
        if isinstance(node, Const):
            if node.name in PAIR_PROJECTIONS:
                ty = node.type
                ok = isinstance(ty, Func) and isinstance(ty.domain, PairT)
                if ok:
                    want = ty.domain.first if node.name == "fst" else ty.domain.second
                    ok = ty.codomain == want
                if not ok:
                    raise TypeMismatch(f"bad type {ty} for {node.name}")
            elif node.name not in env:
                raise UnknownConstant(node.name)
            elif env[node.name] != node.type:
                raise TypeMismatch(
                    f"constant {node.name} used at {node.type}, declared {env[node.name]}"
                )
    return type_of(t)


# -- variables and substitution ----------------------------------------------


def free_vars(t: Term) -> dict[str, Var]:
    out: dict[str, Var] = {}
    _free(t, frozenset(), out)
    return out


def _free(t, bound, out):
    if isinstance(t, Var):
        if t.name not in bound:
            out.setdefault(t.name, t)
    elif isinstance(t, Abs):
        _free(t.body, bound | {t.var.name}, out)
    elif isinstance(t, App):
        _free(t.fun, bound, out)
        _free(t.arg, bound, out)
    elif isinstance(t, PairC):
        _free(t.first, bound, out)
        _free(t.second, bound, out)
    elif isinstance(t, Prim):
        _free(t.inner, bound, out)


def occurs_free(name: str, t: Term) -> bool:
    if isinstance(t, Var):
        return t.name == name
    if isinstance(t, Abs):
        return t.var.name != name and occurs_free(name, t.body)
    if isinstance(t, App):
        return occurs_free(name, t.fun) or occurs_free(name, t.arg)
    if isinstance(t, PairC):
        return occurs_free(name, t.first) or occurs_free(name, t.second)
    if isinstance(t, Prim):
        return occurs_free(name, t.inner)
    return False


def bound_names(t: Term) -> set[str]:
    return {core(n).var.name for _, n in iter_nodes(t) if isinstance(core(n), Abs)}


def fresh_name(base: str, avoid) -> str:
    name = base.rstrip("'") or "v"
    candidate = name + "'"
    while candidate in avoid:
        candidate += "'"
    return candidate


def substitute(t: Term, x: Var, n: Term) -> Term:
    """Capture-avoiding ``t[x := n]``."""
    if type_of(n) != x.type:
        raise TypeMismatch(f"cannot substitute {type_of(n)} for {x.name}: {x.type}")
    return _subst(t, x.name, n, set(free_vars(n)))


def substitute_many(t: Term, mapping: dict[str, Term]) -> Term:
    """Simultaneous capture-avoiding substitution keyed by variable name."""
    if not mapping:
        return t
    fv: set[str] = set()
    for n in mapping.values():
        fv |= set(free_vars(n))
    return _subst_many(t, mapping, fv)


def _subst(t, name, n, fvn):
    return _subst_many(t, {name: n}, fvn)


def _subst_many(t, mapping, fvn):
    if isinstance(t, Var):
        return mapping.get(t.name, t)
    if isinstance(t, Const):
        return t
    if isinstance(t, App):
        return App(_subst_many(t.fun, mapping, fvn), _subst_many(t.arg, mapping, fvn))
    if isinstance(t, PairC):
        return PairC(_subst_many(t.first, mapping, fvn), _subst_many(t.second, mapping, fvn))
    if isinstance(t, Prim):
        return Prim(_subst_many(t.inner, mapping, fvn))
    if isinstance(t, Abs):
        v = t.var
        if v.name in mapping:
            mapping = {k: m for k, m in mapping.items() if k != v.name}
            if not mapping:
                return t
        body_free = free_vars(t.body)
        if not any(k in body_free for k in mapping):
            return t
        if v.name in fvn:
            new = Var(fresh_name(v.name, fvn | set(body_free) | set(mapping)), v.type)
            body = _subst_many(t.body, {v.name: new}, {new.name})
            return Abs(new, _subst_many(body, mapping, fvn))
        return Abs(v, _subst_many(t.body, mapping, fvn))
    raise TypeError(t)


# -- normalization -----------------------------------------------------------


def core(t: Term) -> Term:
    while isinstance(t, Prim):
        t = t.inner
    return t


def strip(t: Term) -> Term:
    """Remove every ``Prim`` marker."""
    if isinstance(t, Prim):
        return strip(t.inner)
    if isinstance(t, Abs):
        return Abs(t.var, strip(t.body))
    if isinstance(t, App):
        return App(strip(t.fun), strip(t.arg))
    if isinstance(t, PairC):
        return PairC(strip(t.first), strip(t.second))
    return t


def normalize(t: Term) -> Term:
    """Beta-normal, eta-short form (pairs included).

    Besides beta, the rules are ``fst <a, b> -> a``, ``snd <a, b> -> b``,
    eta-contraction ``lam x. f(x) -> f`` and surjective pairing
    ``<fst m, snd m> -> m``.
    """
    if isinstance(t, (Var, Const)):
        return t
    if isinstance(t, Prim):
        inner = normalize(t.inner)
        return inner if isinstance(inner, Prim) else Prim(inner)
    if isinstance(t, Abs):
        body = normalize(t.body)
        if isinstance(body, App) and isinstance(body.arg, Var) and body.arg.name == t.var.name:
            if not occurs_free(t.var.name, body.fun):
                return body.fun
        return Abs(t.var, body)
    if isinstance(t, PairC):
        a = normalize(t.first)
        b = normalize(t.second)
        if (
            isinstance(a, App)
            and isinstance(b, App)
            and isinstance(a.fun, Const)
            and isinstance(b.fun, Const)
            and a.fun.name == "fst"
            and b.fun.name == "snd"
            and alpha_key(a.arg, keep_prim=True) == alpha_key(b.arg, keep_prim=True)
        ):
            return a.arg
        return PairC(a, b)
    if isinstance(t, App):
        f = normalize(t.fun)
        fc = core(f)
        if isinstance(fc, Abs):
            return normalize(_subst(fc.body, fc.var.name, t.arg, set(free_vars(t.arg))))
        a = normalize(t.arg)
        if isinstance(fc, Const) and fc.name in PAIR_PROJECTIONS:
            ac = core(a)
            if isinstance(ac, PairC):
                return ac.first if fc.name == "fst" else ac.second
        return App(f, a)
    raise TypeError(t)


def alpha_key(t: Term, keep_prim: bool = False):
    """Hashable key equal for alpha-variants (Prim ignored unless asked)."""
    return _key(t, [], keep_prim)


def _key(t, bound, keep_prim):
    if isinstance(t, Var):
        for i in range(len(bound) - 1, -1, -1):
            if bound[i] == t.name:
                return ("b", len(bound) - 1 - i)
        return ("v", t.name, t.type)
    if isinstance(t, Const):
        return ("c", t.name, t.type)
    if isinstance(t, Prim):
        inner = _key(t.inner, bound, keep_prim)
        return ("m", inner) if keep_prim and inner[0] != "m" else inner
    if isinstance(t, App):
        return ("a", _key(t.fun, bound, keep_prim), _key(t.arg, bound, keep_prim))
    if isinstance(t, PairC):
        return ("p", _key(t.first, bound, keep_prim), _key(t.second, bound, keep_prim))
    if isinstance(t, Abs):
        bound.append(t.var.name)
        try:
            return ("l", t.var.type, _key(t.body, bound, keep_prim))
        finally:
            bound.pop()
    raise TypeError(t)


def alpha_equal(a: Term, b: Term) -> bool:
    return alpha_key(a) == alpha_key(b)


# -- occurrences and paths ---------------------------------------------------


def children(t: Term) -> list[tuple[int, Term]]:
    t = core(t)
    if isinstance(t, App):
        return [(0, t.fun), (1, t.arg)]
    if isinstance(t, PairC):
        return [(0, t.first), (1, t.second)]
    if isinstance(t, Abs):
        return [(0, t.body)]
    return []


def iter_nodes(t: Term, path: Path = ()) -> Iterator[tuple[Path, Term]]:
    """Preorder walk yielding ``(path, node)``; ``node`` keeps its Prim wrappers."""
    yield path, t
    for i, child in children(t):
        yield from iter_nodes(child, path + (i,))


def subterm_at(t: Term, path: Path) -> Term:
    for i in path:
        kids = dict(children(t))
        if i not in kids:
            raise KeyError(path)
        t = kids[i]
    return t


def replace_at(t: Term, path: Path, new: Term) -> Term:
    if not path:
        return new
    if isinstance(t, Prim):
        return Prim(replace_at(t.inner, path, new))
    i, rest = path[0], path[1:]
    if isinstance(t, App):
        if i == 0:
            return App(replace_at(t.fun, rest, new), t.arg)
        return App(t.fun, replace_at(t.arg, rest, new))
    if isinstance(t, PairC):
        if i == 0:
            return PairC(replace_at(t.first, rest, new), t.second)
        return PairC(t.first, replace_at(t.second, rest, new))
    if isinstance(t, Abs) and i == 0:
        return Abs(t.var, replace_at(t.body, rest, new))
    raise KeyError(path)


def wrap_prim_at(t: Term, path: Path) -> Term:
    node = subterm_at(t, path)
    if isinstance(node, Prim):
        return t
    return replace_at(t, path, Prim(node))


def collect_primaries(t: Term) -> list[Path]:
    """Paths of Prim-marked nodes, outermost first."""
    return [p for p, node in iter_nodes(t) if isinstance(node, Prim)]


def spine(t: Term) -> tuple[Term, list[Term], list[bool]]:
    """Split ``h(a1, ..., an)`` into head, arguments and Prim flags.

    ``flags[k]`` records whether the partial application of the head to its
    first ``k`` arguments is Prim-wrapped; :func:`rebuild` inverts this.
    """
    args, flags = [], []
    node = t
    while True:
        flags.append(isinstance(node, Prim))
        node = core(node)
        if isinstance(node, App):
            args.append(node.arg)
            node = node.fun
        else:
            break
    args.reverse()
    flags.reverse()
    return node, args, flags


def rebuild(head: Term, args: Sequence[Term], flags: Sequence[bool]) -> Term:
    out = Prim(head) if flags[0] else head
    for k, a in enumerate(args, start=1):
        out = App(out, a)
        if flags[k]:
            out = Prim(out)
    return out
