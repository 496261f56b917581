"""Simply typed lambda terms with nominal constants.

Terms are self-typed: every constant, nominal, variable and bound index
carries its type, so normalization needs no signature.  Bound variables use
de Bruijn indices; a `Lam` keeps a display hint that does not take part in
equality.  Public helpers always return terms in beta-normal eta-long form.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Sequence, Union


class TermError(Exception):
    pass


# ---------------------------------------------------------------- types


@dataclass(frozen=True)
class Base:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Arrow:
    dom: "Type"
    cod: "Type"

    def __str__(self) -> str:
        d = str(self.dom)
        if isinstance(self.dom, Arrow):
            d = f"({d})"
        return f"{d} -> {self.cod}"


Type = Union[Base, Arrow]
PROP = Base("o")


def arrow(*tys: Type) -> Type:
    """Right-nested arrow: arrow(a, b, c) = a -> b -> c."""
    out = tys[-1]
    for t in reversed(tys[:-1]):
        out = Arrow(t, out)
    return out


def split_type(ty: Type) -> tuple[list[Type], Type]:
    args = []
    while isinstance(ty, Arrow):
        args.append(ty.dom)
        ty = ty.cod
    return args, ty


def is_first_order(ty: Type) -> bool:
    if isinstance(ty, Arrow):
        return is_first_order(ty.dom) and is_first_order(ty.cod)
    return ty != PROP


def is_propositional(ty: Type) -> bool:
    if ty == PROP:
        return True
    return isinstance(ty, Arrow) and is_first_order(ty.dom) and is_propositional(ty.cod)


# ---------------------------------------------------------------- terms


@dataclass(frozen=True)
class Const:
    name: str
    ty: Type


@dataclass(frozen=True)
class Nom:
    index: int
    ty: Type

    def __str__(self) -> str:
        return nom_name(self)


@dataclass(frozen=True)
class Var:
    name: str
    ty: Type


@dataclass(frozen=True)
class Bound:
    index: int
    ty: Type


@dataclass(frozen=True)
class App:
    fn: "Term"
    arg: "Term"


@dataclass(frozen=True)
class Lam:
    ty: Type
    body: "Term"
    hint: str = field(default="x", compare=False)


Term = Union[Const, Nom, Var, Bound, App, Lam]
Atom = (Const, Nom, Var, Bound)

# logical constants
BOT = Const("false", PROP)
TOP = Const("true", PROP)
AND = Const("and", arrow(PROP, PROP, PROP))
OR = Const("or", arrow(PROP, PROP, PROP))
IMP = Const("imp", arrow(PROP, PROP, PROP))
BINOPS = {"and": AND, "or": OR, "imp": IMP}
QUANTS = ("forall", "exists", "nabla")
LOGICAL = {"false", "true", "and", "or", "imp", *QUANTS}


def quant_const(q: str, ty: Type) -> Const:
    return Const(q, Arrow(Arrow(ty, PROP), PROP))


# ---------------------------------------------------------------- basics


def type_of(t: Term) -> Type:
    if isinstance(t, (Const, Nom, Var, Bound)):
        return t.ty
    if isinstance(t, Lam):
        return Arrow(t.ty, type_of(t.body))
    fty = type_of(t.fn)
    if not isinstance(fty, Arrow):
        raise TermError("application of a non-function")
    return fty.cod


def spine(t: Term) -> tuple[Term, list[Term]]:
    args = []
    while isinstance(t, App):
        args.append(t.arg)
        t = t.fn
    args.reverse()
    return t, args


def apply(head: Term, *args: Term) -> Term:
    for a in args:
        head = App(head, a)
    return head


def shift(t: Term, d: int, cutoff: int = 0) -> Term:
    if d == 0:
        return t
    if isinstance(t, Bound):
        return Bound(t.index + d, t.ty) if t.index >= cutoff else t
    if isinstance(t, App):
        return App(shift(t.fn, d, cutoff), shift(t.arg, d, cutoff))
    if isinstance(t, Lam):
        return Lam(t.ty, shift(t.body, d, cutoff + 1), t.hint)
    return t


def _inst(t: Term, s: Term, k: int) -> Term:
    # replace Bound(k) by s (shifted by k), lowering indices above k
    if isinstance(t, Bound):
        if t.index == k:
            return shift(s, k)
        if t.index > k:
            return Bound(t.index - 1, t.ty)
        return t
    if isinstance(t, App):
        return App(_inst(t.fn, s, k), _inst(t.arg, s, k))
    if isinstance(t, Lam):
        return Lam(t.ty, _inst(t.body, s, k + 1), t.hint)
    return t


def _beta(t: Term) -> Term:
    if isinstance(t, Lam):
        return Lam(t.ty, _beta(t.body), t.hint)
    if isinstance(t, App):
        f = _beta(t.fn)
        a = _beta(t.arg)
        if isinstance(f, Lam):
            return _beta(_inst(f.body, a, 0))
        return App(f, a)
    return t


def _expand(r: Term, ty: Type) -> Term:
    if isinstance(ty, Arrow):
        v = _expand(Bound(0, ty.dom), ty.dom)
        return Lam(ty.dom, _expand(App(shift(r, 1), v), ty.cod), "x")
    return r


def _eta_long(t: Term) -> Term:
    if isinstance(t, Lam):
        return Lam(t.ty, _eta_long(t.body), t.hint)
    h, args = spine(t)
    r = apply(h, *[_eta_long(a) for a in args])
    return _expand(r, type_of(r))


@lru_cache(maxsize=200_000)
def normalize_term(t: Term) -> Term:
    """Beta-normal eta-long form; idempotent."""
    return _eta_long(_beta(t))


def beta_apply(f: Term, *args: Term) -> Term:
    return normalize_term(apply(f, *args))


# ---------------------------------------------------------------- queries


def free_vars(t: Term, acc: dict | None = None) -> dict[str, Type]:
    """Free variables in order of first occurrence."""
    if acc is None:
        acc = {}
    if isinstance(t, Var):
        acc.setdefault(t.name, t.ty)
    elif isinstance(t, App):
        free_vars(t.fn, acc)
        free_vars(t.arg, acc)
    elif isinstance(t, Lam):
        free_vars(t.body, acc)
    return acc


def is_ground(t: Term) -> bool:
    return not free_vars(t)


def support(t: Term) -> frozenset:
    return frozenset(_noms(t))


def _noms(t: Term):
    if isinstance(t, Nom):
        yield t
    elif isinstance(t, App):
        yield from _noms(t.fn)
        yield from _noms(t.arg)
    elif isinstance(t, Lam):
        yield from _noms(t.body)


def support_list(t: Term) -> list[Nom]:
    """Support in a canonical order (type name, then index)."""
    return sorted(support(t), key=nom_key)


def nom_key(n: Nom):
    return (str(n.ty), n.index)


def contains_const(t: Term, name: str) -> bool:
    if isinstance(t, Const):
        return t.name == name
    if isinstance(t, App):
        return contains_const(t.fn, name) or contains_const(t.arg, name)
    if isinstance(t, Lam):
        return contains_const(t.body, name)
    return False


def term_size(t: Term) -> int:
    """Number of head occurrences (constants, nominals, variables)."""
    if isinstance(t, App):
        return term_size(t.fn) + term_size(t.arg)
    if isinstance(t, Lam):
        return term_size(t.body)
    return 1


# ---------------------------------------------------------------- typing


def infer_type(sig: Mapping[str, Type], ctx: Mapping[str, Type], t: Term) -> Type:
    """Type of `t` over the signature and variable context, or TermError."""

    def go(t: Term, env: list[Type]) -> Type:
        if isinstance(t, Const):
            if t.name in LOGICAL:
                return t.ty
            if t.name == "eq":
                ty = t.ty
                if not (isinstance(ty, Arrow) and isinstance(ty.cod, Arrow) and ty.cod.dom == ty.dom
                        and ty.cod.cod == PROP and is_first_order(ty.dom)):
                    raise TermError(f"eq used at {ty}")
                return ty
            if t.name not in sig:
                raise TermError(f"unbound constant {t.name}")
            if sig[t.name] != t.ty:
                raise TermError(f"constant {t.name} used at {t.ty}, declared {sig[t.name]}")
            return t.ty
        if isinstance(t, Var):
            if t.name not in ctx:
                raise TermError(f"unbound variable {t.name}")
            if not is_first_order(ctx[t.name]):
                raise TermError(f"eigenvariable {t.name} has non-first-order type")
            if ctx[t.name] != t.ty:
                raise TermError(f"variable {t.name} used at {t.ty}, declared {ctx[t.name]}")
            return t.ty
        if isinstance(t, Nom):
            if not is_first_order(t.ty):
                raise TermError("nominal of non-first-order type")
            return t.ty
        if isinstance(t, Bound):
            if t.index >= len(env) or env[t.index] != t.ty:
                raise TermError("ill-scoped bound variable")
            return t.ty
        if isinstance(t, Lam):
            return Arrow(t.ty, go(t.body, [t.ty] + env))
        f = go(t.fn, env)
        a = go(t.arg, env)
        if not isinstance(f, Arrow) or f.dom != a:
            raise TermError(f"type mismatch: cannot apply {f} to {a}")
        return f.cod

    return go(t, [])


# ---------------------------------------------------------------- substitution


def _replace_vars(t: Term, m: Mapping[str, Term]) -> Term:
    if isinstance(t, Var):
        return m.get(t.name, t)
    if isinstance(t, App):
        return App(_replace_vars(t.fn, m), _replace_vars(t.arg, m))
    if isinstance(t, Lam):
        return Lam(t.ty, _replace_vars(t.body, m), t.hint)
    return t


def apply_subst(t: Term, theta: Mapping[str, Term]) -> Term:
    """Simultaneous substitution of closed-scope terms for free variables."""
    if not theta:
        return t
    for name, s in theta.items():
        fv = free_vars(t)
        if name in fv and type_of(s) != fv[name]:
            raise TermError(f"substitution for {name} has type {type_of(s)}, expected {fv[name]}")
    return normalize_term(_replace_vars(t, theta))


def compose(theta: Mapping[str, Term], sigma: Mapping[str, Term]) -> dict[str, Term]:
    """theta then sigma: x -> (theta x) sigma, plus sigma on variables theta leaves alone."""
    out = {x: apply_subst(t, sigma) for x, t in theta.items()}
    for x, t in sigma.items():
        out.setdefault(x, t)
    return out


def subst_range(theta: Mapping[str, Term], domain: Iterable[str]) -> dict[str, Type]:
    """Smallest context holding the free variables of the assigned terms."""
    acc: dict[str, Type] = {}
    for x in domain:
        if x in theta:
            free_vars(theta[x], acc)
    return acc


def instantiate(body: Term, s: Term) -> Term:
    """Body of a binder with its bound variable replaced by s."""
    return normalize_term(_inst(body, s, 0))


def abstract_var(t: Term, name: str, ty: Type, hint: str | None = None) -> Term:
    """lambda-abstract the free variable `name` out of t."""

    def go(t: Term, k: int) -> Term:
        if isinstance(t, Var) and t.name == name:
            return Bound(k, ty)
        if isinstance(t, App):
            return App(go(t.fn, k), go(t.arg, k))
        if isinstance(t, Lam):
            return Lam(t.ty, go(t.body, k + 1), t.hint)
        return t

    return Lam(ty, go(shift(t, 1), 0), hint or name)


def abstract_nom(t: Term, n: Nom, hint: str = "x") -> Term:
    def go(t: Term, k: int) -> Term:
        if t == n:
            return Bound(k, n.ty)
        if isinstance(t, App):
            return App(go(t.fn, k), go(t.arg, k))
        if isinstance(t, Lam):
            return Lam(t.ty, go(t.body, k + 1), t.hint)
        return t

    return Lam(n.ty, go(shift(t, 1), 0), hint)


# ---------------------------------------------------------------- nominals


@dataclass(frozen=True)
class Perm:
    """Finite type-preserving permutation of nominals, stored as sorted pairs."""

    pairs: tuple = ()

    @staticmethod
    def of(mapping: Mapping[Nom, Nom]) -> "Perm":
        m = {a: b for a, b in mapping.items() if a != b}
        if sorted(m.keys(), key=nom_key) != sorted(m.values(), key=nom_key):
            raise TermError("not a bijection on its carrier")
        for a, b in m.items():
            if a.ty != b.ty:
                raise TermError("permutation must preserve nominal types")
        return Perm(tuple(sorted(m.items(), key=lambda p: nom_key(p[0]))))

    @staticmethod
    def swap(a: Nom, b: Nom) -> "Perm":
        return Perm.of({a: b, b: a})

    def __call__(self, n: Nom) -> Nom:
        for a, b in self.pairs:
            if a == n:
                return b
        return n

    def carrier(self) -> frozenset:
        return frozenset(a for a, _ in self.pairs)

    def inverse(self) -> "Perm":
        return Perm.of({b: a for a, b in self.pairs})

    def then(self, other: "Perm") -> "Perm":
        """Apply self first, then other."""
        keys = self.carrier() | other.carrier()
        return Perm.of({k: other(self(k)) for k in keys})

    def is_identity(self) -> bool:
        return not self.pairs


IDENTITY = Perm()


def apply_perm(t: Term, pi: Perm) -> Term:
    if not pi.pairs:
        return t
    if isinstance(t, Nom):
        return pi(t)
    if isinstance(t, App):
        return App(apply_perm(t.fn, pi), apply_perm(t.arg, pi))
    if isinstance(t, Lam):
        return Lam(t.ty, apply_perm(t.body, pi), t.hint)
    return t


def permutations_of(noms: Sequence[Nom]) -> Iterable[Perm]:
    """All type-preserving permutations of a finite set, identity first."""
    groups: dict[Type, list[Nom]] = {}
    for n in sorted(set(noms), key=nom_key):
        groups.setdefault(n.ty, []).append(n)
    per_group = [
        [dict(zip(g, p)) for p in itertools.permutations(g)] for g in groups.values()
    ]
    for combo in itertools.product(*per_group):
        m: dict[Nom, Nom] = {}
        for part in combo:
            m.update(part)
        yield Perm.of(m)


def find_perm(a: Term, b: Term) -> Perm | None:
    """Least permutation (identity first, then lexicographic) with a[pi] = b."""
    noms = support(a) | support(b)
    if len(noms) > 8:
        raise TermError("too many nominals to search for a renaming")
    for pi in permutations_of(sorted(noms, key=nom_key)):
        if apply_perm(a, pi) == b:
            return pi
    return None


def fresh_nominal(ty: Type, avoid: Iterable[Nom]) -> Nom:
    """Least-index nominal of type ty not in avoid (indices start at 1)."""
    used = {n.index for n in avoid if n.ty == ty}
    i = 1
    while i in used:
        i += 1
    return Nom(i, ty)


def raise_var(y: str, nominals: Sequence[Nom], ty: Type) -> tuple[Var, Term]:
    """The raised variable y : t1 -> ... -> tk -> ty and the term y n1 ... nk."""
    v = Var(y, arrow(*[n.ty for n in nominals], ty))
    return v, normalize_term(apply(v, *nominals))


def fresh_name(base: str, avoid: Iterable[str]) -> str:
    avoid = set(avoid)
    if base not in avoid:
        return base
    stem = base.rstrip("0123456789") or base
    i = 1
    while f"{stem}{i}" in avoid:
        i += 1
    return f"{stem}{i}"


# ---------------------------------------------------------------- ground terms


def constructors_for(sig: Mapping[str, Type], ty: Type) -> list[tuple[str, Type]]:
    out = []
    for name, cty in sig.items():
        if name in LOGICAL:
            continue
        args, target = split_type(cty)
        if target == ty and is_first_order(cty):
            out.append((name, cty))
    return out


def enumerate_ground(
    sig: Mapping[str, Type], ty: Type, max_size: int, nominals: int = 0
) -> list[Term]:
    """Ground terms of type ty with at most max_size head occurrences.

    Ordered by size, then by printed form.  With nominals=k the first k
    nominals of every base type take part as size-1 atoms.
    """
    if not is_first_order(ty):
        raise TermError(f"type {ty} is not first-order")
    sig_items = tuple(sorted((n, t) for n, t in sig.items() if n not in LOGICAL))
    out: list[Term] = []
    for n in range(1, max_size + 1):
        level = [normalize_term(t) for t in _gen(sig_items, ty, n, (), nominals)]
        level.sort(key=show)
        out.extend(level)
    return out


@lru_cache(maxsize=None)
def _gen(sig_items: tuple, ty: Type, n: int, env: tuple, nominals: int) -> tuple:
    # terms of exact size n, eta-long, with bound variables typed by env
    if n <= 0:
        return ()
    if isinstance(ty, Arrow):
        return tuple(Lam(ty.dom, b) for b in _gen(sig_items, ty.cod, n, (ty.dom,) + env, nominals))
    heads: list[tuple[Term, list[Type]]] = []
    for name, cty in sig_items:
        args, target = split_type(cty)
        if target == ty and is_first_order(cty):
            heads.append((Const(name, cty), args))
    for i, bty in enumerate(env):
        args, target = split_type(bty)
        if target == ty:
            heads.append((Bound(i, bty), args))
    if nominals:
        for k in range(1, nominals + 1):
            heads.append((Nom(k, ty), []))
    res = []
    for h, args in heads:
        for parts in _compositions(n - 1, len(args)):
            pools = [_gen(sig_items, a, p, env, nominals) for a, p in zip(args, parts)]
            for combo in itertools.product(*pools):
                res.append(apply(h, *combo))
    return tuple(res)


def _compositions(total: int, k: int):
    if k == 0:
        if total == 0:
            yield ()
        return
    for first in range(1, total - k + 2):
        for rest in _compositions(total - first, k - 1):
            yield (first,) + rest


# ---------------------------------------------------------------- printing

_PREC = {"imp": 1, "or": 2, "and": 3}
_SYM_ASCII = {"imp": "=>", "or": "\\/", "and": "/\\"}


def show(t: Term, names: Sequence[str] = (), annotate: bool = True) -> str:
    """Concrete syntax (ASCII) for a canonical term."""
    used = set(free_vars(t)) | set(names)
    return _show(t, list(names), used, 0, annotate)


def _binder_name(hint: str, used: set) -> str:
    base = hint if hint and hint[0].isalpha() else "x"
    return fresh_name(base, used)


def _ty_atom(ty: Type) -> str:
    return f"({ty})" if isinstance(ty, Arrow) else str(ty)


def _show(t: Term, names: list, used: set, prec: int, annotate: bool) -> str:
    h, args = spine(t)
    if isinstance(h, Const) and h.name in _PREC and len(args) == 2:
        p = _PREC[h.name]
        # right-associative connectives
        lhs = _show(args[0], names, used, p + 1, annotate)
        rhs = _show(args[1], names, used, p, annotate)
        s = f"{lhs} {_SYM_ASCII[h.name]} {rhs}"
        return f"({s})" if prec > p else s
    if isinstance(h, Const) and h.name in QUANTS and len(args) == 1 and isinstance(args[0], Lam):
        binders = []
        body = args[0]
        inner_names = list(names)
        inner_used = set(used)
        while True:
            nm = _binder_name(body.hint, inner_used)
            inner_used.add(nm)
            inner_names = [nm] + inner_names
            binders.append(f"{nm}:{_ty_atom(body.ty)}" if annotate else nm)
            b = body.body
            bh, bargs = spine(b)
            if (
                isinstance(bh, Const)
                and bh.name == h.name
                and len(bargs) == 1
                and isinstance(bargs[0], Lam)
            ):
                body = bargs[0]
                continue
            break
        s = f"{h.name} {', '.join(binders)}. {_show(b, inner_names, inner_used, 0, annotate)}"
        return f"({s})" if prec > 0 else s
    if isinstance(t, Lam):
        nm = _binder_name(t.hint, used)
        inner = _show(t.body, [nm] + names, used | {nm}, 0, annotate)
        s = f"\\{nm}:{_ty_atom(t.ty)}. {inner}" if annotate else f"\\{nm}. {inner}"
        return f"({s})" if prec > 0 else s
    hs = _show_head(h, names)
    if not args:
        return hs
    parts = [hs] + [_show(a, names, used, 10, annotate) for a in args]
    s = " ".join(parts)
    return f"({s})" if prec >= 10 else s


def _show_head(h: Term, names: list) -> str:
    if isinstance(h, Const):
        return h.name
    if isinstance(h, Var):
        return h.name
    if isinstance(h, Nom):
        return nom_name(h)
    if isinstance(h, Bound):
        if h.index < len(names):
            return names[h.index]
        return f"#{h.index}"
    raise TermError("unexpected head")


def nom_name(n: Nom) -> str:
    return f"n{n.index}@{n.ty}" if isinstance(n.ty, Base) else f"n{n.index}@({n.ty})"
