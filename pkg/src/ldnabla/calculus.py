"""Sequents, rule applications, derivations and the kernel checker.

Hypotheses form a multiset.  A sequent keeps them sorted by printed form, so
two sequents are equal exactly when they have the same context, the same
multiset of hypotheses and the same consequent.  Left rules name their
principal formula by its position in that sorted tuple.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Iterable, Sequence

from .formulas import is_atomic, view, open_body, pred_of
from .terms import (
    IDENTITY,
    PROP,
    App,
    Const,
    Lam,
    Nom,
    Perm,
    Term,
    TermError,
    Type,
    Var,
    _replace_vars,
    apply,
    apply_perm,
    contains_const,
    free_vars,
    fresh_name,
    fresh_nominal,
    infer_type,
    is_first_order,
    normalize_term,
    raise_var,
    show,
    spine,
    support,
    support_list,
)
from .theory import Theory, TheoryError, defn_instance, defn_premises
from .unify import RESTRICTED, PatternError, unify_terms

TAGS = (
    "botL", "topR", "impL", "impR", "andL1", "andL2", "andR", "orL", "orR1", "orR2",
    "allL", "allR", "exL", "exR", "nablaL", "nablaR", "cL", "wL", "Ax", "mc",
    "defL", "defR", "muL", "muR",
)
LEFT_TAGS = {"botL", "impL", "andL1", "andL2", "orL", "allL", "exL", "nablaL", "cL", "wL", "defL", "muL"}
PRETTY = {
    "botL": "⊥L", "topR": "⊤R", "impL": "⊃L", "impR": "⊃R", "andL1": "∧L1", "andL2": "∧L2",
    "andR": "∧R", "orL": "∨L", "orR1": "∨R1", "orR2": "∨R2", "allL": "∀L", "allR": "∀R",
    "exL": "∃L", "exR": "∃R", "nablaL": "∇L", "nablaR": "∇R", "cL": "cL", "wL": "wL",
    "Ax": "Ax", "mc": "mc", "defL": "ΔL", "defR": "ΔR", "muL": "μL", "muR": "μR",
}


class RuleError(Exception):
    pass


@lru_cache(maxsize=100_000)
def hyp_key(t: Term) -> str:
    return show(t)


def sort_hyps(hyps: Iterable[Term]) -> tuple:
    return tuple(sorted(hyps, key=hyp_key))


@dataclass(frozen=True)
class Sequent:
    ctx: tuple  # ((name, type), ...)
    hyps: tuple  # sorted
    concl: Term

    @staticmethod
    def make(ctx, hyps, concl) -> "Sequent":
        return Sequent(tuple(ctx), sort_hyps(hyps), concl)

    @property
    def ctx_map(self) -> dict:
        return dict(self.ctx)

    def without(self, i: int) -> list:
        return list(self.hyps[:i] + self.hyps[i + 1:])

    def index_of(self, f: Term) -> int:
        return self.hyps.index(f)

    def render(self) -> str:
        ctx = ", ".join(x for x, _ in self.ctx)
        hyps = ", ".join(show(h) for h in self.hyps)
        return f"{ctx}; {hyps}{' ' if hyps else ''}|- {show(self.concl)}"

    def support(self) -> frozenset:
        s = support(self.concl)
        for h in self.hyps:
            s |= support(h)
        return s


@dataclass(frozen=True)
class Rule:
    tag: str
    pos: int | None = None  # principal hypothesis
    term: Term | None = None  # instantiation for allL / exR
    var: str | None = None  # new eigenvariable for allR / exL
    nom: Nom | None = None  # nominal for nablaL / nablaR
    perm: Perm | None = None  # Ax
    clause: int | None = None  # defR
    inv: Term | None = None  # muL invariant
    cuts: tuple | None = None  # mc cut formulas
    parts: tuple | None = None  # mc: which premise each conclusion hypothesis goes to (0 = last)

    def label(self) -> str:
        return PRETTY.get(self.tag, self.tag)


@dataclass(frozen=True)
class Derivation:
    concl: Sequent
    rule: Rule
    premises: tuple = ()

    def size(self) -> int:
        return 1 + sum(p.size() for p in self.premises)

    def count(self, tag: str) -> int:
        return (self.rule.tag == tag) + sum(p.count(tag) for p in self.premises)

    def height(self) -> int:
        return 1 + max((p.height() for p in self.premises), default=0)

    def index(self) -> int:
        """Largest number of muL rules on a branch."""
        here = 1 if self.rule.tag == "muL" else 0
        return here + max((p.index() for p in self.premises), default=0)

    def at(self, path: Sequence[int]) -> "Derivation":
        d = self
        for i in path:
            d = d.premises[i]
        return d

    def nodes(self, path=()):
        yield path, self
        for i, p in enumerate(self.premises):
            yield from p.nodes(path + (i,))


@dataclass(frozen=True)
class CheckResult:
    ok: bool
    path: tuple = ()
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


# ---------------------------------------------------------------- helpers


def _principal(goal: Sequent, rule: Rule) -> Term:
    if rule.pos is None or not 0 <= rule.pos < len(goal.hyps):
        raise RuleError(f"{rule.tag}: no hypothesis at position {rule.pos}")
    return goal.hyps[rule.pos]


def _expect(v, kind: str, what: str) -> None:
    if v.kind != kind:
        raise RuleError(f"{what} is not of the form expected ({kind})")


def _check_term(th: Theory, ctx: dict, t: Term, ty: Type | None = None) -> Type:
    sig = dict(th.sig)
    try:
        got = infer_type(sig, ctx, t)
    except TermError as e:
        raise RuleError(f"ill-typed witness: {e}") from None
    if ty is not None and got != ty:
        raise RuleError(f"witness has type {got}, expected {ty}")
    return got


def check_formula(th: Theory, ctx: dict, f: Term) -> None:
    try:
        ty = infer_type(dict(th.sig), ctx, f)
    except TermError as e:
        raise RuleError(f"ill-formed formula {show(f)}: {e}") from None
    if ty != PROP:
        raise RuleError(f"{show(f)} is not a formula")
    for x, xty in ctx.items():
        if not is_first_order(xty):
            raise RuleError(f"eigenvariable {x} has a non-first-order type")


def _fresh_eigen(goal: Sequent, rule: Rule) -> str:
    if not rule.var:
        raise RuleError(f"{rule.tag} needs a new eigenvariable name")
    if rule.var in goal.ctx_map:
        raise RuleError(f"eigenvariable {rule.var} is not fresh")
    return rule.var


def _raise_into(goal: Sequent, rule: Rule, body: Lam) -> tuple[tuple, Term]:
    """Raised instance C[y n/x] with n the support of the body, plus the new context."""
    y = _fresh_eigen(goal, rule)
    noms = support_list(body)
    v, yn = raise_var(y, noms, body.ty)
    ctx = goal.ctx + ((y, v.ty),)
    return ctx, normalize_term(apply(body, yn))


def _fresh_nom(rule: Rule, body: Lam) -> Nom:
    n = rule.nom
    if n is None:
        raise RuleError(f"{rule.tag} needs a nominal")
    if n.ty != body.ty:
        raise RuleError(f"nominal {n} has the wrong type")
    if n in support(body):
        raise RuleError(f"nominal {n} occurs in the support of the body")
    return n


def replace_const(t: Term, name: str, s: Term) -> Term:
    def go(t: Term) -> Term:
        if isinstance(t, Const) and t.name == name:
            return s
        if isinstance(t, App):
            return App(go(t.fn), go(t.arg))
        if isinstance(t, Lam):
            return Lam(t.ty, go(t.body), t.hint)
        return t

    return normalize_term(go(t))


# ---------------------------------------------------------------- backward application


def backward_apply(goal: Sequent, rule: Rule, th: Theory) -> list[Sequent]:
    """Premises demanded by the rule schema, or RuleError."""
    tag = rule.tag
    ctx = goal.ctx
    C = goal.concl
    mk = Sequent.make
    if tag == "botL":
        _expect(view(_principal(goal, rule)), "bot", "principal formula")
        return []
    if tag == "topR":
        _expect(view(C), "top", "consequent")
        return []
    if tag == "impR":
        v = view(C)
        _expect(v, "imp", "consequent")
        return [mk(ctx, goal.hyps + (v.left,), v.right)]
    if tag == "andR":
        v = view(C)
        _expect(v, "and", "consequent")
        return [mk(ctx, goal.hyps, v.left), mk(ctx, goal.hyps, v.right)]
    if tag in ("orR1", "orR2"):
        v = view(C)
        _expect(v, "or", "consequent")
        return [mk(ctx, goal.hyps, v.left if tag == "orR1" else v.right)]
    if tag == "exR":
        v = view(C)
        _expect(v, "exists", "consequent")
        if rule.term is None:
            raise RuleError("exR needs a witness term")
        _check_term(th, goal.ctx_map, rule.term, v.qty)
        return [mk(ctx, goal.hyps, open_body(v, rule.term))]
    if tag == "allR":
        v = view(C)
        _expect(v, "forall", "consequent")
        ctx2, body = _raise_into(goal, rule, v.body)
        return [mk(ctx2, goal.hyps, body)]
    if tag == "nablaR":
        v = view(C)
        _expect(v, "nabla", "consequent")
        n = _fresh_nom(rule, v.body)
        return [mk(ctx, goal.hyps, open_body(v, n))]
    if tag == "defR":
        a = C
        p = pred_of(a)
        if not th.is_defined(p):
            raise RuleError("defR: consequent is not a defined atom")
        if rule.clause is None:
            raise RuleError("defR needs a clause index")
        b = defn_instance(th, a, goal.ctx_map, rule.clause)
        if b is None:
            raise RuleError(f"defR: clause {rule.clause} does not match {show(a)}")
        return [mk(ctx, goal.hyps, b)]
    if tag == "muR":
        p = pred_of(C)
        if not th.is_inductive(p):
            raise RuleError("muR: consequent is not an inductive atom")
        ind = th.inds[p]
        _, args = spine(C)
        return [mk(ctx, goal.hyps, ind.body_for(ind.pred_const, args))]
    if tag == "Ax":
        if len(goal.hyps) != 1:
            raise RuleError("Ax needs exactly one hypothesis")
        a = goal.hyps[0]
        if not is_atomic(a):
            raise RuleError("Ax is restricted to atomic formulas")
        pi = rule.perm or IDENTITY
        if apply_perm(a, pi) != C:
            raise RuleError("Ax: consequent is not the permuted hypothesis")
        return []
    if tag == "mc":
        return _mc_premises(goal, rule, th)
    # left rules
    f = _principal(goal, rule)
    rest = goal.without(rule.pos)
    v = view(f)
    if tag == "cL":
        return [mk(ctx, list(goal.hyps) + [f], C)]
    if tag == "wL":
        return [mk(ctx, rest, C)]
    if tag == "impL":
        _expect(v, "imp", "principal formula")
        return [mk(ctx, rest, v.left), mk(ctx, rest + [v.right], C)]
    if tag in ("andL1", "andL2"):
        _expect(v, "and", "principal formula")
        return [mk(ctx, rest + [v.left if tag == "andL1" else v.right], C)]
    if tag == "orL":
        _expect(v, "or", "principal formula")
        return [mk(ctx, rest + [v.left], C), mk(ctx, rest + [v.right], C)]
    if tag == "allL":
        _expect(v, "forall", "principal formula")
        if rule.term is None:
            raise RuleError("allL needs a witness term")
        _check_term(th, goal.ctx_map, rule.term, v.qty)
        return [mk(ctx, rest + [open_body(v, rule.term)], C)]
    if tag == "exL":
        _expect(v, "exists", "principal formula")
        ctx2, body = _raise_into(goal, rule, v.body)
        return [mk(ctx2, rest + [body], C)]
    if tag == "nablaL":
        _expect(v, "nabla", "principal formula")
        n = _fresh_nom(rule, v.body)
        return [mk(ctx, rest + [open_body(v, n)], C)]
    if tag == "defL":
        if v.kind != "atom" or not th.is_defined(v.pred):
            raise RuleError("defL: principal formula is not a defined atom")
        try:
            prem = defn_premises(th, f, goal.ctx_map)
        except PatternError as e:
            raise RuleError(f"defL: {e}") from None
        out = []
        for d in prem:
            th_ = d.theta
            out.append(
                mk(
                    d.range_ctx,
                    [_sub(h, th_) for h in rest] + [d.body],
                    _sub(C, th_),
                )
            )
        return out
    if tag == "muL":
        if v.kind != "atom" or not th.is_inductive(v.pred):
            raise RuleError("muL: principal formula is not an inductive atom")
        ind = th.inds[v.pred]
        s = rule.inv
        if s is None:
            raise RuleError("muL needs an invariant")
        if free_vars(s):
            raise RuleError("muL invariant must be closed")
        _check_term(th, {}, s, ind.pred_const.ty)
        xs = [Var(x, ty) for x, ty in ind.params]
        minor = mk(ind.params, [ind.body_for(s, xs)], normalize_term(apply(s, *xs)))
        major = mk(ctx, rest + [normalize_term(apply(s, *v.args))], C)
        return [minor, major]
    raise RuleError(f"unknown rule {tag}")


def _sub(t: Term, theta: dict) -> Term:
    return normalize_term(_replace_vars(t, theta)) if theta else t


def _mc_premises(goal: Sequent, rule: Rule, th: Theory) -> list[Sequent]:
    cuts = tuple(rule.cuts or ())
    parts = tuple(rule.parts) if rule.parts is not None else (0,) * len(goal.hyps)
    if len(parts) != len(goal.hyps):
        raise RuleError("mc partition does not cover the hypotheses")
    n = len(cuts)
    if any(not 0 <= p <= n for p in parts):
        raise RuleError("mc partition refers to a missing premise")
    for c in cuts:
        check_formula(th, goal.ctx_map, c)
    out = []
    for j in range(1, n + 1):
        delta = [h for h, p in zip(goal.hyps, parts) if p == j]
        out.append(Sequent.make(goal.ctx, delta, cuts[j - 1]))
    gamma = [h for h, p in zip(goal.hyps, parts) if p == 0]
    out.append(Sequent.make(goal.ctx, list(cuts) + gamma, goal.concl))
    return out


# ---------------------------------------------------------------- checking


def check_sequent(th: Theory, s: Sequent) -> None:
    ctx = s.ctx_map
    if len(ctx) != len(s.ctx):
        raise RuleError("duplicate eigenvariable")
    for h in s.hyps:
        check_formula(th, ctx, h)
    check_formula(th, ctx, s.concl)
    if sort_hyps(s.hyps) != s.hyps:
        raise RuleError("hypotheses are not in canonical order")


def check_derivation(d: Derivation, th: Theory) -> CheckResult:
    try:
        check_sequent(th, d.concl)
    except RuleError as e:
        return CheckResult(False, (), str(e))
    stack = [((), d)]
    while stack:
        path, node = stack.pop()
        try:
            if node.rule.tag not in TAGS:
                raise RuleError(f"unknown rule {node.rule.tag}")
            want = backward_apply(node.concl, node.rule, th)
        except (RuleError, TheoryError, TermError) as e:
            return CheckResult(False, path, f"{node.rule.label()}: {e}")
        got = [p.concl for p in node.premises]
        if len(want) != len(got):
            what = "premise set incomplete" if len(got) < len(want) else "too many premises"
            return CheckResult(
                False, path, f"{node.rule.label()}: {what} ({len(got)} given, {len(want)} expected)"
            )
        for i, (w, g) in enumerate(zip(want, got)):
            if w != g:
                return CheckResult(
                    False, path + (i,),
                    f"{node.rule.label()}: premise {i} should be {w.render()} but is {g.render()}",
                )
        for i, p in enumerate(node.premises):
            stack.append((path + (i,), p))
    return CheckResult(True)


def node(goal: Sequent, rule: Rule, th: Theory, *premises: Derivation) -> Derivation:
    """Assemble a node, checking that the premises fit the rule."""
    want = backward_apply(goal, rule, th)
    got = [p.concl for p in premises]
    if want != got:
        raise RuleError(f"{rule.label()}: premises do not match")
    return Derivation(goal, rule, tuple(premises))


# ---------------------------------------------------------------- derived rules


def derive_init(th: Theory, ctx: tuple, b: Term, pi: Perm = IDENTITY) -> Derivation:
    """Cut-free derivation of ctx; b |- b[pi] by recursion on b."""
    goal = Sequent.make(ctx, [b], apply_perm(b, pi))
    return _init(th, goal, b, pi)


def _init(th: Theory, goal: Sequent, b: Term, pi: Perm) -> Derivation:
    ctx = goal.ctx
    v = view(b)
    bp = apply_perm(b, pi)
    k = v.kind
    if k == "bot":
        return Derivation(goal, Rule("botL", pos=0))
    if k == "top":
        return Derivation(goal, Rule("topR"))
    if k == "atom":
        return Derivation(goal, Rule("Ax", perm=pi))
    vp = view(bp)
    if k == "and":
        l = derive_init(th, ctx, v.left, pi)
        r = derive_init(th, ctx, v.right, pi)
        pl = _apply_left(th, Sequent.make(ctx, [b], vp.left), "andL1", b, l)
        pr = _apply_left(th, Sequent.make(ctx, [b], vp.right), "andL2", b, r)
        return node(goal, Rule("andR"), th, pl, pr)
    if k == "or":
        l = derive_init(th, ctx, v.left, pi)
        r = derive_init(th, ctx, v.right, pi)
        dl = node(Sequent.make(ctx, [v.left], bp), Rule("orR1"), th, l)
        dr = node(Sequent.make(ctx, [v.right], bp), Rule("orR2"), th, r)
        return _apply_left(th, goal, "orL", b, dl, dr)
    if k == "imp":
        # b, A[pi] |- B[pi] by impL on b
        s1 = Sequent.make(ctx, [b, vp.left], vp.right)
        minor = derive_init(th, ctx, vp.left, pi.inverse())
        inner = derive_init(th, ctx, v.right, pi)
        major_goal = Sequent.make(ctx, [v.right, vp.left], vp.right)
        major = node(major_goal, Rule("wL", pos=major_goal.index_of(vp.left)), th, inner)
        d1 = node(s1, Rule("impL", pos=s1.index_of(b)), th, minor, major)
        return node(goal, Rule("impR"), th, d1)
    if k in ("forall", "exists"):
        y = fresh_name("y", [x for x, _ in ctx])
        if k == "forall":
            # allR on b[pi], then allL on b with y applied to pi^-1 of the support
            noms = support_list(vp.body)
            yv, _ = raise_var(y, noms, v.qty)
            t = normalize_term(apply(yv, *[pi.inverse()(n) for n in noms]))
            ctx2 = ctx + ((y, yv.ty),)
            inst = open_body(v, t)
            sub = derive_init(th, ctx2, inst, pi)
            g2 = Sequent.make(ctx2, [b], sub.concl.concl)
            d2 = node(g2, Rule("allL", pos=0, term=t), th, sub)
            return node(goal, Rule("allR", var=y), th, d2)
        noms = support_list(v.body)
        yv, yn = raise_var(y, noms, v.qty)
        t = normalize_term(apply(yv, *[pi(n) for n in noms]))
        ctx2 = ctx + ((y, yv.ty),)
        inst = open_body(v, yn)
        sub = derive_init(th, ctx2, inst, pi)
        g2 = Sequent.make(ctx2, [inst], bp)
        d2 = node(g2, Rule("exR", term=t), th, sub)
        return node(goal, Rule("exL", pos=0, var=y), th, d2)
    if k == "nabla":
        avoid = set(support(b)) | set(support(bp)) | set(pi.carrier())
        n = fresh_nominal(v.qty, avoid)
        inst = open_body(v, n)
        sub = derive_init(th, ctx, inst, pi)
        g2 = Sequent.make(ctx, [inst], bp)
        d2 = node(g2, Rule("nablaR", nom=n), th, sub)
        return node(goal, Rule("nablaL", pos=0, nom=n), th, d2)
    raise RuleError(f"cannot build Init for {show(b)}")


def _apply_left(th: Theory, goal: Sequent, tag: str, principal: Term, *prem: Derivation, **kw) -> Derivation:
    return node(goal, Rule(tag, pos=goal.index_of(principal), **kw), th, *prem)


class PositivityError(RuleError):
    pass


def derive_unfold_left(th: Theory, premise: Derivation, atom: Term) -> Derivation:
    """From a derivation of G, B p t |- C build G, p t |- C ending in muL with S = B p."""
    p = pred_of(atom)
    if not th.is_inductive(p):
        raise RuleError(f"{p} is not inductively defined")
    ind = th.inds[p]
    _, args = spine(atom)
    s = normalize_term(apply(ind.operator, ind.pred_const))
    unfolded = ind.body_for(ind.pred_const, args)
    g = premise.concl
    if unfolded not in g.hyps:
        raise RuleError("premise does not have the unfolded body as a hypothesis")
    rest = list(g.hyps)
    rest.remove(unfolded)
    goal = Sequent.make(g.ctx, rest + [atom], g.concl)
    xs = [Var(x, ty) for x, ty in ind.params]
    template = ind.body_for(ind.pred_const, xs)
    minor = _monotone(th, ind, s, ind.params, template)
    return node(goal, Rule("muL", pos=goal.index_of(atom), inv=s), th, minor, premise)


def _monotone(th: Theory, ind, s: Term, ctx: tuple, f: Term) -> Derivation:
    """f[S/p] |- f for p positive in f, where S t |- p t comes from muR and Init."""
    p = ind.predicate
    fs = replace_const(f, p, s)
    goal = Sequent.make(ctx, [fs], f)
    v = view(f)
    if not _mentions(f, p):
        return derive_init(th, ctx, f)
    k = v.kind
    if k == "atom":
        if v.pred != p or any(_mentions(a, p) for a in v.args):
            raise PositivityError(f"{p} occurs inside a term")
        body = ind.body_for(ind.pred_const, list(v.args))
        init = derive_init(th, ctx, body)
        return node(goal, Rule("muR"), th, init)
    vs = view(fs)
    if k == "and":
        l = _monotone(th, ind, s, ctx, v.left)
        r = _monotone(th, ind, s, ctx, v.right)
        pl = _apply_left(th, Sequent.make(ctx, [fs], v.left), "andL1", fs, l)
        pr = _apply_left(th, Sequent.make(ctx, [fs], v.right), "andL2", fs, r)
        return node(goal, Rule("andR"), th, pl, pr)
    if k == "or":
        l = _monotone(th, ind, s, ctx, v.left)
        r = _monotone(th, ind, s, ctx, v.right)
        dl = node(Sequent.make(ctx, [vs.left], f), Rule("orR1"), th, l)
        dr = node(Sequent.make(ctx, [vs.right], f), Rule("orR2"), th, r)
        return _apply_left(th, goal, "orL", fs, dl, dr)
    if k == "imp":
        if _mentions(v.left, p):
            raise PositivityError(f"{p} occurs in the antecedent of an implication")
        a = v.left
        s1 = Sequent.make(ctx, [fs, a], v.right)
        minor = derive_init(th, ctx, a)
        inner = _monotone(th, ind, s, ctx, v.right)
        mg = Sequent.make(ctx, [vs.right, a], v.right)
        major = node(mg, Rule("wL", pos=mg.index_of(a)), th, inner)
        d1 = node(s1, Rule("impL", pos=s1.index_of(fs)), th, minor, major)
        return node(goal, Rule("impR"), th, d1)
    if k in ("forall", "exists"):
        y = fresh_name("y", [x for x, _ in ctx])
        noms = support_list(v.body) if k == "forall" else support_list(vs.body)
        yv, yn = raise_var(y, noms, v.qty)
        ctx2 = ctx + ((y, yv.ty),)
        fi = open_body(v, yn)
        sub = _monotone(th, ind, s, ctx2, fi)
        fsi = open_body(vs, yn)
        if k == "forall":
            g2 = Sequent.make(ctx2, [fs], fi)
            d2 = node(g2, Rule("allL", pos=0, term=yn), th, sub)
            return node(goal, Rule("allR", var=y), th, d2)
        g2 = Sequent.make(ctx2, [fsi], f)
        d2 = node(g2, Rule("exR", term=yn), th, sub)
        return node(goal, Rule("exL", pos=0, var=y), th, d2)
    if k == "nabla":
        n = fresh_nominal(v.qty, set(support(f)) | set(support(fs)))
        fi = open_body(v, n)
        sub = _monotone(th, ind, s, ctx, fi)
        g2 = Sequent.make(ctx, [open_body(vs, n)], f)
        d2 = node(g2, Rule("nablaR", nom=n), th, sub)
        return node(goal, Rule("nablaL", pos=0, nom=n), th, d2)
    raise PositivityError(f"unexpected formula {show(f)}")


def _mentions(t: Term, name: str) -> bool:
    return contains_const(t, name)


# ---------------------------------------------------------------- transformations


def perm_derivation(d: Derivation, sigma: Perm) -> Derivation:
    """Rename every nominal of a derivation by sigma."""

    def ps(s: Sequent) -> Sequent:
        return Sequent.make(s.ctx, [apply_perm(h, sigma) for h in s.hyps], apply_perm(s.concl, sigma))

    def go(d: Derivation) -> Derivation:
        r = d.rule
        new = ps(d.concl)
        kw = {}
        if r.pos is not None:
            kw["pos"] = new.index_of(apply_perm(d.concl.hyps[r.pos], sigma))
        if r.term is not None:
            kw["term"] = apply_perm(r.term, sigma)
        if r.nom is not None:
            kw["nom"] = sigma(r.nom)
        if r.perm is not None:
            kw["perm"] = sigma.inverse().then(r.perm).then(sigma)
        if r.inv is not None:
            kw["inv"] = apply_perm(r.inv, sigma)
        if r.cuts is not None:
            kw["cuts"] = tuple(apply_perm(c, sigma) for c in r.cuts)
            # partition follows the hypotheses
            parts = [None] * len(new.hyps)
            used = set()
            for h, part in zip(d.concl.hyps, r.parts or ()):
                h2 = apply_perm(h, sigma)
                for i, x in enumerate(new.hyps):
                    if x == h2 and i not in used:
                        parts[i] = part
                        used.add(i)
                        break
            kw["parts"] = tuple(parts)
        return Derivation(new, replace(r, **kw), tuple(go(p) for p in d.premises))

    return go(d)


def subst_derivation(d: Derivation, theta: dict, new_ctx: tuple, th: Theory) -> Derivation:
    """Instantiate the eigenvariables of a derivation (nominal-free theta).

    Eigenvariables introduced above the root are kept; if a name clashes
    with new_ctx it is renamed.  defL nodes recompute their premise sets
    and keep the instances of the old premises.
    """
    def go(d: Derivation, theta: dict, ctx: tuple) -> Derivation:
        s = d.concl
        goal = Sequent.make(ctx, [_sub(h, theta) for h in s.hyps], _sub(s.concl, theta))
        r = d.rule
        kw = {}
        if r.pos is not None:
            kw["pos"] = goal.index_of(_sub(s.hyps[r.pos], theta))
        if r.term is not None:
            kw["term"] = _sub(r.term, theta)
        if r.cuts is not None:
            kw["cuts"] = tuple(_sub(c, theta) for c in r.cuts)
            parts = [None] * len(goal.hyps)
            used = set()
            for h, part in zip(s.hyps, r.parts or ()):
                h2 = _sub(h, theta)
                for i, x in enumerate(goal.hyps):
                    if x == h2 and i not in used:
                        parts[i] = part
                        used.add(i)
                        break
            kw["parts"] = tuple(parts)
        names = {x for x, _ in ctx}
        if r.tag in ("allR", "exL"):
            y = r.var
            prem = d.premises[0]
            yty = dict(prem.concl.ctx)[y]
            y2 = fresh_name(y, names)
            kw["var"] = y2
            theta2 = dict(theta)
            theta2[y] = Var(y2, yty)
            rule = replace(r, **kw)
            sub = go(prem, theta2, ctx + ((y2, yty),))
            return node(goal, rule, th, sub)
        rule = replace(r, **kw)
        if r.tag == "defL":
            want = backward_apply(goal, rule, th)
            prems = []
            atom = goal.hyps[rule.pos]
            old_atom = s.hyps[r.pos]
            old_prem = defn_premises(th, old_atom, s.ctx_map)
            new_prem = defn_premises(th, atom, goal.ctx_map)
            for w, npm in zip(want, new_prem):
                k = [i for i, o in enumerate(old_prem) if o.clause == npm.clause]
                if not k:
                    raise RuleError("instantiated defL gained a premise")
                o = old_prem[k[0]]
                # find sigma' : old range -> new range with o.theta sigma' = theta npm.theta
                classes = {x: RESTRICTED for x, _ in o.range_ctx}
                pairs = []
                for y, yty in s.ctx:
                    lhs = o.theta.get(y, Var(y, yty))
                    rhs = _sub(_sub(Var(y, yty), theta), npm.theta)
                    pairs.append((lhs, rhs))
                # rename old range apart from the new one
                ren = {x: Var(f"_o_{x}", ty) for x, ty in o.range_ctx}
                pairs = [(_sub(a, ren), b) for a, b in pairs]
                classes = {v.name: RESTRICTED for v in ren.values()}
                sig = unify_terms(pairs, classes)
                if sig is None:
                    raise RuleError("cannot relate instantiated defL premise")
                th2 = {x: sig.get(ren[x].name, ren[x]) for x, _ in o.range_ctx}
                sub = go(d.premises[k[0]], th2, w.ctx)
                prems.append(sub)
            return node(goal, rule, th, *prems)
        if r.tag == "muL":
            minor = d.premises[0]
            major = go(d.premises[1], theta, ctx)
            return node(goal, rule, th, minor, major)
        prems = [go(p, theta, ctx) for p in d.premises]
        return node(goal, rule, th, *prems)

    return go(d, theta, tuple(new_ctx))
