"""Higher-order pattern unification.

Variables come in two classes.  Restricted variables (eigenvariables of the
sequent) may mention a nominal only when they are applied to it; open
variables (clause variables) may use nominals freely as constants.  Both
classes may use only the bound variables they are applied to.  Variables not
listed as solvable are rigid.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping

from .terms import (
    Bound,
    Lam,
    Nom,
    Term,
    Type,
    Var,
    _replace_vars,
    apply,
    arrow,
    free_vars,
    normalize_term,
    spine,
    split_type,
    support,
    type_of,
    fresh_name,
)

RESTRICTED = "r"
OPEN = "u"
_counter = itertools.count(1)
_PREFIX = "_u"


class PatternError(Exception):
    """Raised when a term lies outside the pattern fragment."""


def _fresh(hint: str) -> str:
    return f"{_PREFIX}{next(_counter)}_{hint}"


def _hint(name: str) -> str:
    # strip the machine prefix added by renaming apart
    if name.startswith(_PREFIX) or name.startswith("_c"):
        return name.split("_", 2)[-1] or "Z"
    return name


def is_pattern(t: Term, ctx: Mapping[str, Type] | None = None) -> bool:
    """Every free variable is applied to distinct bound variables or nominals."""

    def ok(t: Term, depth: int) -> bool:
        if isinstance(t, Lam):
            return ok(t.body, depth + 1)
        h, args = spine(t)
        if isinstance(h, Var) and (ctx is None or h.name in ctx):
            seen = []
            for a in args:
                if isinstance(a, Bound) and a.index < depth:
                    pass
                elif isinstance(a, Nom):
                    pass
                else:
                    return False
                if a in seen:
                    return False
                seen.append(a)
            return True
        if isinstance(h, Var) and ctx is not None and h.name not in ctx:
            return False
        return all(ok(a, depth) for a in args)

    return ok(t, 0)


class _Fail(Exception):
    pass


class Unifier:
    def __init__(self, classes: Mapping[str, str]):
        self.classes = dict(classes)
        self.sigma: dict[str, Term] = {}

    # -- helpers
    def flex(self, h: Term) -> bool:
        return isinstance(h, Var) and h.name in self.classes and h.name not in self.sigma

    def bind(self, name: str, val: Term) -> None:
        val = normalize_term(val)
        one = {name: val}
        for k in list(self.sigma):
            self.sigma[k] = normalize_term(_replace_vars(self.sigma[k], one))
        self.sigma[name] = val

    def resolve(self, t: Term) -> Term:
        if not self.sigma:
            return t
        return normalize_term(_replace_vars(t, self.sigma))

    def new_var(self, hint: str, ty: Type, cls: str) -> Var:
        name = _fresh(_hint(hint))
        self.classes[name] = cls
        return Var(name, ty)

    # -- main loop
    def unify(self, s: Term, t: Term) -> None:
        work = [(s, t, 0)]
        while work:
            s, t, depth = work.pop()
            s = self.resolve(s)
            t = self.resolve(t)
            if s == t:
                continue
            if isinstance(s, Lam) or isinstance(t, Lam):
                if not (isinstance(s, Lam) and isinstance(t, Lam)) or s.ty != t.ty:
                    raise _Fail()
                work.append((s.body, t.body, depth + 1))
                continue
            hs, as_ = spine(s)
            ht, at = spine(t)
            fs, ft = self.flex(hs), self.flex(ht)
            if not fs and not ft:
                if hs != ht or len(as_) != len(at):
                    raise _Fail()
                work.extend((a, b, depth) for a, b in zip(as_, at))
            elif fs and ft and hs.name == ht.name:
                self.flex_same(hs, as_, at, depth)
            elif fs and ft:
                if self.classes[hs.name] == RESTRICTED and self.classes[ht.name] == OPEN:
                    self.solve(ht, at, s, depth)
                else:
                    self.solve(hs, as_, t, depth)
            elif fs:
                self.solve(hs, as_, t, depth)
            else:
                self.solve(ht, at, s, depth)

    def check_args(self, args, depth) -> None:
        seen = set()
        for a in args:
            if not (isinstance(a, Nom) or (isinstance(a, Bound) and a.index < depth)):
                raise PatternError("flexible variable applied to a non-atom")
            if a in seen:
                raise PatternError("flexible variable applied to a repeated atom")
            seen.add(a)

    def flex_same(self, F: Var, a, b, depth) -> None:
        self.check_args(a, depth)
        self.check_args(b, depth)
        keep = [i for i in range(len(a)) if a[i] == b[i]]
        argtys, target = split_type(F.ty)
        G = self.new_var(F.name, arrow(*[argtys[i] for i in keep], target), self.classes[F.name])
        n = len(a)
        body = apply(G, *[Bound(n - 1 - i, argtys[i]) for i in keep])
        self.bind(F.name, _lams(argtys, body))

    def solve(self, F: Var, args, t: Term, depth: int) -> None:
        self.check_args(args, depth)
        n = len(args)
        cls = self.classes[F.name]
        pos = {a: i for i, a in enumerate(args)}

        def atom_ok(a: Term, k: int) -> bool:
            if isinstance(a, Bound):
                return a.index < k or Bound(a.index - k, a.ty) in pos
            if isinstance(a, Nom):
                return a in pos or cls == OPEN
            return True

        def abst(t: Term, k: int) -> Term:
            if isinstance(t, Lam):
                return Lam(t.ty, abst(t.body, k + 1), t.hint)
            h, targs = spine(t)
            if isinstance(h, Var) and h.name in self.sigma:
                return abst(self.resolve(t), k)
            if self.flex(h):
                if h.name == F.name:
                    raise _Fail()
                keep = [i for i, a in enumerate(targs) if atom_ok(a, k)]
                if len(keep) < len(targs):
                    argtys, target = split_type(h.ty)
                    G = self.new_var(h.name, arrow(*[argtys[i] for i in keep], target), self.classes[h.name])
                    m = len(targs)
                    self.bind(h.name, _lams(argtys, apply(G, *[Bound(m - 1 - i, argtys[i]) for i in keep])))
                    h, targs = G, [targs[i] for i in keep]
                return apply(h, *[abst(a, k) for a in targs])
            return apply(atom(h, k), *[abst(a, k) for a in targs])

        def atom(h: Term, k: int) -> Term:
            if isinstance(h, Bound):
                if h.index < k:
                    return h
                j = Bound(h.index - k, h.ty)
                if j in pos:
                    return Bound(k + n - 1 - pos[j], h.ty)
                raise _Fail()
            if isinstance(h, Nom):
                if h in pos:
                    return Bound(k + n - 1 - pos[h], h.ty)
                if cls == OPEN:
                    return h
                raise _Fail()
            if isinstance(h, Var) and h.name == F.name:
                raise _Fail()
            return h

        body = abst(t, 0)
        argtys = [type_of(a) for a in args]
        self.bind(F.name, _lams(argtys, body))


def _lams(tys, body: Term) -> Term:
    for ty in reversed(tys):
        body = Lam(ty, body)
    return body


def unify_terms(pairs, classes: Mapping[str, str]) -> dict[str, Term] | None:
    """Most general unifier of the pairs, or None.  Raises PatternError."""
    u = Unifier(classes)
    try:
        for s, t in pairs:
            u.unify(s, t)
    except _Fail:
        return None
    return u.sigma


# ---------------------------------------------------------------- clause heads


@dataclass(frozen=True)
class UnifyResult:
    theta: dict  # eigenvariable -> term over range_ctx
    rho: dict  # clause variable -> term over range_ctx
    range_ctx: tuple  # ((name, type), ...)


def rename_apart(ctx: Mapping[str, Type]) -> dict[str, Var]:
    return {x: Var(f"_c{next(_counter)}_{x}", ty) for x, ty in ctx.items()}


def unify_with_head(
    a: Term, a_ctx: Mapping[str, Type], h: Term, h_ctx: Mapping[str, Type]
) -> UnifyResult | None:
    """Most general (theta, rho) with a.theta = h.rho and empty support in theta."""
    if not is_pattern(a, a_ctx):
        raise PatternError("atom is outside the pattern fragment")
    if not is_pattern(h, h_ctx):
        raise PatternError("clause head is outside the pattern fragment")
    ren = rename_apart(h_ctx)
    h2 = normalize_term(_replace_vars(h, ren))
    classes = {y: RESTRICTED for y in a_ctx}
    classes.update({v.name: OPEN for v in ren.values()})
    sigma = unify_terms([(a, h2)], classes)
    if sigma is None:
        return None
    theta_raw = {y: sigma.get(y, Var(y, ty)) for y, ty in a_ctx.items()}
    rho_raw = {x: sigma.get(ren[x].name, ren[x]) for x in h_ctx}
    # canonical names for the new eigenvariables
    rng: dict[str, Type] = {}
    for y in a_ctx:
        free_vars(theta_raw[y], rng)
    avoid = set(a_ctx)
    renaming: dict[str, Term] = {}
    ctx_out = []
    for v, ty in rng.items():
        if v in a_ctx:
            ctx_out.append((v, ty))
            continue
        nm = fresh_name(_hint(v), avoid)
        avoid.add(nm)
        renaming[v] = Var(nm, ty)
        ctx_out.append((nm, ty))
    theta = {y: normalize_term(_replace_vars(t, renaming)) for y, t in theta_raw.items()}
    rho = {x: normalize_term(_replace_vars(t, renaming)) for x, t in rho_raw.items()}
    for t in theta.values():
        assert not support(t), "substitution for eigenvariables picked up a nominal"
    return UnifyResult(theta, rho, tuple(ctx_out))


def match_against_head(h: Term, h_ctx: Mapping[str, Type], a: Term) -> dict | None:
    """The unique rho with h.rho = a for ground a, or None."""
    if free_vars(a):
        raise ValueError("match_against_head expects a ground atom")
    r = unify_with_head(a, {}, h, h_ctx)
    return None if r is None else r.rho


def match_pattern(pat: Term, ctx: Mapping[str, Type], target: Term, rigid=()) -> dict | None:
    """Solve pat.sigma = target for the variables of ctx; other variables are rigid."""
    sigma = unify_terms([(pat, target)], {x: OPEN for x in ctx})
    if sigma is None:
        return None
    out = {}
    for x, ty in ctx.items():
        out[x] = sigma.get(x, Var(x, ty))
    return out
