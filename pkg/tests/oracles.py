"""Independent oracles used to cross-check the library.

None of these reuse the library's algorithms.  They work on their own tuple
representations; the converters at the bottom only translate shapes.
"""

from __future__ import annotations

import itertools
import random
from functools import lru_cache

# ---------------------------------------------------------------- propositional prover
#
# Formulas: ("atom", name) | ("bot",) | ("top",) | (op, A, B) with op in and/or/imp.
# The prover is Dyckhoff's contraction-free calculus G4ip, which terminates
# without loop checking and is complete for intuitionistic propositional logic.

BOT = ("bot",)
TOP = ("top",)


def atom(p: str) -> tuple:
    return ("atom", p)


def imp(a, b):
    return ("imp", a, b)


def conj(a, b):
    return ("and", a, b)


def disj(a, b):
    return ("or", a, b)


def provable(hyps, goal) -> bool:
    return _g4(tuple(sorted(hyps)), goal)


@lru_cache(maxsize=None)
def _g4(gamma: tuple, goal: tuple) -> bool:
    g = list(gamma)
    if BOT in g or goal == TOP:
        return True
    if goal[0] == "atom" and goal in g:
        return True
    # invertible left rules
    for i, h in enumerate(g):
        rest = g[:i] + g[i + 1:]
        k = h[0]
        if k == "top":
            return _g4(_s(rest), goal)
        if k == "and":
            return _g4(_s(rest + [h[1], h[2]]), goal)
        if k == "or":
            return _g4(_s(rest + [h[1]]), goal) and _g4(_s(rest + [h[2]]), goal)
        if k == "imp":
            a, b = h[1], h[2]
            if a[0] == "atom" and a in rest:
                return _g4(_s(rest + [b]), goal)
            if a == TOP:
                return _g4(_s(rest + [b]), goal)
            if a == BOT:
                return _g4(_s(rest), goal)
            if a[0] == "and":
                return _g4(_s(rest + [imp(a[1], imp(a[2], b))]), goal)
            if a[0] == "or":
                return _g4(_s(rest + [imp(a[1], b), imp(a[2], b)]), goal)
    # invertible right rules
    if goal[0] == "and":
        return _g4(gamma, goal[1]) and _g4(gamma, goal[2])
    if goal[0] == "imp":
        return _g4(_s(g + [goal[1]]), goal[2])
    # choices
    if goal[0] == "or" and (_g4(gamma, goal[1]) or _g4(gamma, goal[2])):
        return True
    for i, h in enumerate(g):
        if h[0] == "imp" and h[1][0] == "imp":
            rest = g[:i] + g[i + 1:]
            c, d, b = h[1][1], h[1][2], h[2]
            if _g4(_s(rest + [imp(d, b)]), imp(c, d)) and _g4(_s(rest + [b]), goal):
                return True
    return False


def _s(xs) -> tuple:
    return tuple(sorted(xs))


def classically_valid(hyps, goal, atoms=("a", "b", "c")) -> bool:
    def ev(f, val):
        k = f[0]
        if k == "atom":
            return val[f[1]]
        if k == "bot":
            return False
        if k == "top":
            return True
        x, y = ev(f[1], val), ev(f[2], val)
        return {"and": x and y, "or": x or y, "imp": (not x) or y}[k]

    for bits in itertools.product([False, True], repeat=len(atoms)):
        val = dict(zip(atoms, bits))
        if all(ev(h, val) for h in hyps) and not ev(goal, val):
            return False
    return True


def random_prop(rng: random.Random, depth: int, atoms=("a", "b", "c")) -> tuple:
    if depth <= 0 or rng.random() < 0.25:
        r = rng.random()
        if r < 0.08:
            return BOT
        if r < 0.14:
            return TOP
        return atom(rng.choice(atoms))
    op = rng.choice(["and", "or", "imp"])
    return (op, random_prop(rng, depth - 1, atoms), random_prop(rng, depth - 1, atoms))


# ---------------------------------------------------------------- simply typed terms
#
# Types: "i" or ("->", A, B).  Terms: ("c", name) | ("v", name) | ("b", k) with
# de Bruijn index k | ("app", f, a) | ("lam", body).

def arr(*tys):
    out = tys[-1]
    for t in reversed(tys[:-1]):
        out = ("->", t, out)
    return out


def _shift(t, d, cut=0):
    k = t[0]
    if k == "b":
        return ("b", t[1] + d) if t[1] >= cut else t
    if k == "app":
        return ("app", _shift(t[1], d, cut), _shift(t[2], d, cut))
    if k == "lam":
        return ("lam", _shift(t[1], d, cut + 1))
    return t


def _subst(t, s, j=0):
    # replace index j by s in t, lowering the indices above j
    k = t[0]
    if k == "b":
        if t[1] == j:
            return _shift(s, j)
        return ("b", t[1] - 1) if t[1] > j else t
    if k == "app":
        return ("app", _subst(t[1], s, j), _subst(t[2], s, j))
    if k == "lam":
        return ("lam", _subst(t[1], s, j + 1))
    return t


def beta(t):
    k = t[0]
    if k == "app":
        f, a = beta(t[1]), beta(t[2])
        if f[0] == "lam":
            return beta(_subst(f[1], a))
        return ("app", f, a)
    if k == "lam":
        return ("lam", beta(t[1]))
    return t


def inst(t, sigma: dict):
    """Replace free variables by closed terms, then beta-normalise."""
    def go(t):
        k = t[0]
        if k == "v":
            return sigma.get(t[1], t)
        if k == "app":
            return ("app", go(t[1]), go(t[2]))
        if k == "lam":
            return ("lam", go(t[1]))
        return t
    return beta(go(t))


def size(t) -> int:
    k = t[0]
    if k == "app":
        return size(t[1]) + size(t[2])
    if k == "lam":
        return size(t[1])
    return 1


def ground_terms(sig: dict, ty, n: int, env: tuple = ()) -> list:
    """All eta-long beta-normal closed terms of type ty with exactly n heads."""
    if isinstance(ty, tuple):
        return [("lam", b) for b in ground_terms(sig, ty[2], n, (ty[1],) + env)]
    out = []
    heads = [(("c", c), _args(cty)) for c, cty in sorted(sig.items()) if _target(cty) == ty]
    heads += [(("b", i), _args(bty)) for i, bty in enumerate(env) if _target(bty) == ty]
    for h, args in heads:
        if not args:
            if n == 1:
                out.append(h)
            continue
        for split in _splits(n - 1, len(args)):
            pools = [ground_terms(sig, a, m, env) for a, m in zip(args, split)]
            for combo in itertools.product(*pools):
                t = h
                for x in combo:
                    t = ("app", t, x)
                out.append(t)
    return out


def ground_upto(sig: dict, ty, n: int) -> list:
    return [t for m in range(1, n + 1) for t in ground_terms(sig, ty, m)]


def _args(ty) -> list:
    out = []
    while isinstance(ty, tuple):
        out.append(ty[1])
        ty = ty[2]
    return out


def _target(ty):
    while isinstance(ty, tuple):
        ty = ty[2]
    return ty


def _splits(total: int, k: int):
    if k == 1:
        if total >= 1:
            yield (total,)
        return
    for first in range(1, total - k + 2):
        for rest in _splits(total - first, k - 1):
            yield (first,) + rest


def free_vars(t, acc=None) -> set:
    acc = set() if acc is None else acc
    k = t[0]
    if k == "v":
        acc.add(t[1])
    elif k == "app":
        free_vars(t[1], acc)
        free_vars(t[2], acc)
    elif k == "lam":
        free_vars(t[1], acc)
    return acc


def solutions(pairs, var_types: dict, sig: dict, max_size: int = 3) -> set:
    """Every grounding of the variables (terms of size <= max_size) that equates all pairs."""
    names = sorted(set().union(*[free_vars(s) | free_vars(t) for s, t in pairs]))
    pools = [ground_upto(sig, var_types[x], max_size) for x in names]
    out = set()
    for combo in itertools.product(*pools):
        sigma = dict(zip(names, combo))
        if all(inst(s, sigma) == inst(t, sigma) for s, t in pairs):
            out.add(tuple(sorted(sigma.items())))
    return out


def instances(theta: dict, range_types: dict, sig: dict, max_size: int = 3) -> set:
    """Ground instances of a substitution, restricted to size <= max_size values."""
    names = sorted(range_types)
    pools = [ground_upto(sig, range_types[y], max_size) for y in names]
    out = set()
    for combo in itertools.product(*pools):
        tau = dict(zip(names, combo))
        g = {x: inst(t, tau) for x, t in theta.items()}
        if all(size(v) <= max_size for v in g.values()):
            out.add(tuple(sorted(g.items())))
    return out


# ---------------------------------------------------------------- random patterns


def random_pattern(rng: random.Random, budget: int, env: tuple, vars_: dict, sig: dict):
    """A random pattern of base type "i" with at most budget heads."""
    choices = []
    for c, cty in sig.items():
        n = len(_args(cty))
        if n + 1 <= budget:
            choices.append(("c", c, n))
    for i in range(len(env)):
        choices.append(("b", i, 0))
    for x, xty in vars_.items():
        n = len(_args(xty))
        if n == 0 or len(env) >= n:
            choices.append(("v", x, n))
    kind, name, n = rng.choice(choices)
    if kind == "b":
        return ("b", name)
    if kind == "v":
        t = ("v", name)
        for i in rng.sample(range(len(env)), n):
            t = ("app", t, ("b", i))
        return t
    t = ("c", name)
    left = budget - 1
    for k in range(n):
        remaining = n - k - 1
        share = left - remaining if remaining == 0 else rng.randint(1, left - remaining)
        t = ("app", t, random_pattern(rng, share, env, vars_, sig))
        left -= share
    return t


# ---------------------------------------------------------------- measures


def nat_value(t) -> int:
    """Number of s constructors in a numeral z, s z, ..."""
    n = 0
    while t[0] == "app":
        n += 1
        t = t[2]
    return n


def list_length(t) -> int:
    n = 0
    while t[0] == "app":
        n += 1
        t = t[2]
    return n


# ---------------------------------------------------------------- converters


def prop_of(f) -> tuple:
    """Library formula to prover tuple."""
    from ldnabla.formulas import view

    v = view(f)
    if v.kind == "atom":
        return atom(v.pred)
    if v.kind in ("bot", "top"):
        return (v.kind,)
    if v.kind in ("and", "or", "imp"):
        return (v.kind, prop_of(v.left), prop_of(v.right))
    raise ValueError(f"not propositional: {v.kind}")


def formula_of(p: tuple):
    from ldnabla.formulas import mk_and, mk_imp, mk_or
    from ldnabla.terms import BOT as LBOT, PROP, TOP as LTOP, Const

    k = p[0]
    if k == "atom":
        return Const(p[1], PROP)
    if k == "bot":
        return LBOT
    if k == "top":
        return LTOP
    mk = {"and": mk_and, "or": mk_or, "imp": mk_imp}[k]
    return mk(formula_of(p[1]), formula_of(p[2]))


def lib_type(ty):
    from ldnabla.terms import Arrow, Base

    if isinstance(ty, tuple):
        return Arrow(lib_type(ty[1]), lib_type(ty[2]))
    return Base(ty)


def to_lib(t, sig: dict, var_types: dict, env: tuple = ()):
    from ldnabla.terms import App, Bound, Const, Var

    k = t[0]
    if k == "c":
        return Const(t[1], lib_type(sig[t[1]]))
    if k == "v":
        return Var(t[1], lib_type(var_types[t[1]]))
    if k == "b":
        return Bound(t[1], lib_type(env[t[1]]))
    if k == "app":
        return App(to_lib(t[1], sig, var_types, env), to_lib(t[2], sig, var_types, env))
    raise ValueError("lambda needs a type; use to_lib_typed")


def to_lib_typed(t, ty, sig: dict, var_types: dict, env: tuple = ()):
    from ldnabla.terms import Lam, normalize_term

    if isinstance(ty, tuple):
        assert t[0] == "lam"
        return Lam(lib_type(ty[1]), to_lib_typed(t[1], ty[2], sig, var_types, (ty[1],) + env))
    return normalize_term(to_lib(t, sig, var_types, env))


def from_lib(t):
    from ldnabla.terms import App, Bound, Const, Lam, Nom, Var, nom_name

    if isinstance(t, Const):
        return ("c", t.name)
    if isinstance(t, Nom):
        return ("c", nom_name(t))
    if isinstance(t, Var):
        return ("v", t.name)
    if isinstance(t, Bound):
        return ("b", t.index)
    if isinstance(t, App):
        return ("app", from_lib(t.fn), from_lib(t.arg))
    if isinstance(t, Lam):
        return ("lam", from_lib(t.body))
    raise ValueError(f"unsupported term {t!r}")


def oracle_type(ty):
    from ldnabla.terms import Arrow

    if isinstance(ty, Arrow):
        return ("->", oracle_type(ty.dom), oracle_type(ty.cod))
    return ty.name


def fo_match(pat, target, sigma: dict) -> dict | None:
    """First-order matching of a pattern with ("v", x) leaves against a closed term."""
    k = pat[0]
    if k == "v":
        if pat[1] in sigma:
            return sigma if sigma[pat[1]] == target else None
        return {**sigma, pat[1]: target}
    if k == "app":
        if target[0] != "app":
            return None
        s = fo_match(pat[1], target[1], sigma)
        return None if s is None else fo_match(pat[2], target[2], s)
    return sigma if pat == target else None
