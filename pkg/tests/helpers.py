"""Shared test machinery: a random well-typed term generator and an
independent small-step reducer used as an oracle for ``normalize``."""

from __future__ import annotations

import itertools
import random

from ellipsis_hou.terms import (
    E,
    GQ,
    PAIR_QUANT,
    T,
    Abs,
    App,
    Const,
    Func,
    PairC,
    PairT,
    Prim,
    Term,
    Var,
    arrow,
    fst_const,
    snd_const,
    split_arrow,
)

SIGNATURE = {
    "a": E,
    "b": E,
    "c": E,
    "top": T,
    "f": arrow(E, E),
    "g": arrow(E, E, E),
    "p": arrow(E, T),
    "r": arrow(E, E, T),
    "neg": arrow(T, T),
    "and": arrow(T, T, T),
    "every": PAIR_QUANT,
    "most": GQ,
}
CONSTS = [Const(n, ty) for n, ty in SIGNATURE.items()]
BASE_TYPES = [E, T]


class TermGen:
    """Random closed or open terms of a requested type.

    Beta-redexes and pair projections are injected on purpose so that
    normalization has work to do.
    """

    def __init__(self, seed: int, max_depth: int = 6):
        self.rng = random.Random(seed)
        self.max_depth = max_depth
        self.counter = itertools.count()

    def fresh(self, ty):
        return Var(f"v{next(self.counter)}", ty)

    def random_type(self, depth=2):
        roll = self.rng.random()
        if depth <= 0 or roll < 0.5:
            return self.rng.choice(BASE_TYPES)
        if roll < 0.85:
            return Func(self.random_type(depth - 1), self.random_type(depth - 1))
        return PairT(self.random_type(depth - 1), self.random_type(depth - 1))

    def term(self, ty, ctx=(), depth=None):
        depth = self.max_depth if depth is None else depth
        if depth <= 0:
            return self.atom(ty, ctx)
        choices = ["head", "head", "atom"]
        if isinstance(ty, Func):
            choices += ["lam", "lam", "lam"]
        if isinstance(ty, PairT):
            choices += ["pair", "pair"]
        choices += ["redex", "proj"]
        kind = self.rng.choice(choices)
        if kind == "lam":
            v = self.fresh(ty.domain)
            return Abs(v, self.term(ty.codomain, ctx + (v,), depth - 1))
        if kind == "pair":
            return PairC(self.term(ty.first, ctx, depth - 1), self.term(ty.second, ctx, depth - 1))
        if kind == "redex":
            sigma = self.random_type(1)
            v = self.fresh(sigma)
            body = self.term(ty, ctx + (v,), depth - 1)
            return App(Abs(v, body), self.term(sigma, ctx, depth - 1))
        if kind == "proj":
            other = self.rng.choice(BASE_TYPES)
            if self.rng.random() < 0.5:
                pair = self.term(PairT(ty, other), ctx, depth - 1)
                return App(fst_const(PairT(ty, other)), pair)
            pair = self.term(PairT(other, ty), ctx, depth - 1)
            return App(snd_const(PairT(other, ty)), pair)
        if kind == "head":
            heads = [h for h in list(ctx) + CONSTS if self._ends_in(h.type, ty)]
            if heads:
                out = self.rng.choice(heads)
                for p in split_arrow(out.type)[0]:
                    if _type(out) == ty:
                        break
                    out = App(out, self.term(p, ctx, depth - 1))
                return out
        return self.atom(ty, ctx)

    def _ends_in(self, hty, ty):
        cur = hty
        while True:
            if cur == ty:
                return True
            if not isinstance(cur, Func):
                return False
            cur = cur.codomain

    def atom(self, ty, ctx):
        exact = [h for h in list(ctx) + CONSTS if h.type == ty]
        if exact:
            return self.rng.choice(exact)
        if isinstance(ty, Func):
            v = self.fresh(ty.domain)
            return Abs(v, self.atom(ty.codomain, ctx + (v,)))
        if isinstance(ty, PairT):
            return PairC(self.atom(ty.first, ctx), self.atom(ty.second, ctx))
        raise AssertionError(f"no atom of type {ty}")


def _type(t):
    from ellipsis_hou.terms import type_of

    return type_of(t)


# -- oracle reducer ----------------------------------------------------------

_oracle_names = itertools.count()


def _fv(t, bound=frozenset()):
    if isinstance(t, Var):
        return set() if t.name in bound else {t.name}
    if isinstance(t, Const):
        return set()
    if isinstance(t, Prim):
        return _fv(t.inner, bound)
    if isinstance(t, Abs):
        return _fv(t.body, bound | {t.var.name})
    if isinstance(t, App):
        return _fv(t.fun, bound) | _fv(t.arg, bound)
    return _fv(t.first, bound) | _fv(t.second, bound)


def oracle_subst(t, name, value):
    """Substitution that renames every binder it passes under."""
    if isinstance(t, Var):
        return value if t.name == name else t
    if isinstance(t, Const):
        return t
    if isinstance(t, Prim):
        return Prim(oracle_subst(t.inner, name, value))
    if isinstance(t, App):
        return App(oracle_subst(t.fun, name, value), oracle_subst(t.arg, name, value))
    if isinstance(t, PairC):
        return PairC(oracle_subst(t.first, name, value), oracle_subst(t.second, name, value))
    if t.var.name == name:
        return t
    fresh = Var(f"_o{next(_oracle_names)}", t.var.type)
    body = oracle_subst(t.body, t.var.name, fresh)
    return Abs(fresh, oracle_subst(body, name, value))


def _strip(t):
    if isinstance(t, Prim):
        return _strip(t.inner)
    if isinstance(t, App):
        return App(_strip(t.fun), _strip(t.arg))
    if isinstance(t, PairC):
        return PairC(_strip(t.first), _strip(t.second))
    if isinstance(t, Abs):
        return Abs(t.var, _strip(t.body))
    return t


def _step(t):
    """One leftmost-outermost reduction step, or None at normal form."""
    if isinstance(t, App):
        if isinstance(t.fun, Abs):
            return oracle_subst(t.fun.body, t.fun.var.name, t.arg)
        if isinstance(t.fun, Const) and t.fun.name in ("fst", "snd") and isinstance(t.arg, PairC):
            return t.arg.first if t.fun.name == "fst" else t.arg.second
        s = _step(t.fun)
        if s is not None:
            return App(s, t.arg)
        s = _step(t.arg)
        return None if s is None else App(t.fun, s)
    if isinstance(t, Abs):
        b = t.body
        if isinstance(b, App) and isinstance(b.arg, Var) and b.arg.name == t.var.name and t.var.name not in _fv(b.fun):
            return b.fun
        s = _step(b)
        return None if s is None else Abs(t.var, s)
    if isinstance(t, PairC):
        a, b = t.first, t.second
        if (
            isinstance(a, App) and isinstance(b, App)
            and isinstance(a.fun, Const) and isinstance(b.fun, Const)
            and a.fun.name == "fst" and b.fun.name == "snd"
            and _alpha(a.arg, b.arg)
        ):
            return a.arg
        s = _step(a)
        if s is not None:
            return PairC(s, b)
        s = _step(b)
        return None if s is None else PairC(a, s)
    return None


def _alpha(x, y, env_x=(), env_y=()):
    if isinstance(x, Var) and isinstance(y, Var):
        ix = next((i for i, n in enumerate(reversed(env_x)) if n == x.name), None)
        iy = next((i for i, n in enumerate(reversed(env_y)) if n == y.name), None)
        if ix is None and iy is None:
            return x.name == y.name
        return ix == iy
    if type(x) is not type(y):
        return False
    if isinstance(x, Const):
        return x.name == y.name and x.type == y.type
    if isinstance(x, App):
        return _alpha(x.fun, y.fun, env_x, env_y) and _alpha(x.arg, y.arg, env_x, env_y)
    if isinstance(x, PairC):
        return _alpha(x.first, y.first, env_x, env_y) and _alpha(x.second, y.second, env_x, env_y)
    if isinstance(x, Abs):
        return x.var.type == y.var.type and _alpha(x.body, y.body, env_x + (x.var.name,), env_y + (y.var.name,))
    return False


def oracle_normalize(t, limit=100_000):
    t = _strip(t)
    for _ in range(limit):
        s = _step(t)
        if s is None:
            return t
        t = s
    raise RuntimeError("oracle did not terminate")


def oracle_alpha_equal(x, y):
    return _alpha(_strip(x), _strip(y))


# -- brute-force abstraction oracle ---------------------------------------


def brute_force_abstractions(args, rhs):
    """Every lam x1..xn. s' obtained by choosing a set of occurrences of the
    args in ``rhs`` (paths, no chosen path below another) and replacing them.

    Returned as a set of canonical keys of the bodies, with params as
    placeholder constants ``#1 .. #n``.
    """
    from ellipsis_hou.terms import alpha_key, core, free_vars, iter_nodes, replace_at, strip

    keys = [alpha_key(a) for a in args]
    occs = []
    for path, node in iter_nodes(rhs):
        k = alpha_key(core(node))
        if free_vars(core(node)).keys() & _bound_above(rhs, path):
            continue
        for i, ki in enumerate(keys):
            if k == ki:
                occs.append((path, i))
    out = set()
    for mask in range(1 << len(occs)):
        chosen = [occs[j] for j in range(len(occs)) if mask >> j & 1]
        paths = [p for p, _ in chosen]
        if len(set(paths)) != len(paths):
            continue
        if any(p != q and q[: len(p)] == p for p in paths for q in paths):
            continue
        body = rhs
        for path, i in sorted(chosen, key=lambda c: -len(c[0])):
            body = replace_at(body, path, _placeholder(args[i], i))
        out.add(alpha_key(body, keep_prim=True))
    return out


def _placeholder(arg, i):
    from ellipsis_hou.terms import type_of

    return Const(f"#{i + 1}", type_of(arg))


def _bound_above(t, path):
    from ellipsis_hou.terms import core

    names = set()
    node = t
    for step in path:
        c = core(node)
        if isinstance(c, Abs):
            names.add(c.var.name)
            node = c.body
        elif isinstance(c, App):
            node = c.fun if step == 0 else c.arg
        elif isinstance(c, PairC):
            node = c.first if step == 0 else c.second
    return names


def body_key(binding, n):
    """Canonical key of a binding's body with params as ``#1 .. #n``."""
    from ellipsis_hou.terms import alpha_key, apply, normalize, split_arrow, type_of

    ts, _ = split_arrow(type_of(binding))
    params = [Const(f"#{i + 1}", ts[i]) for i in range(n)]
    return alpha_key(normalize(apply(binding, *params)), keep_prim=True)


def corpus_problem(name):
    """Load the bundled corpus problem whose declared name is ``name``."""
    from ellipsis_hou.runner import corpus_files, load_problem

    for path in corpus_files():
        pf = load_problem(path)
        if pf.name == name:
            return pf
    raise KeyError(name)
