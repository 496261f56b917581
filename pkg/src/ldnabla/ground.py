"""The infinitary ground calculus as lazily evaluated derivation schemas.

A schema node carries its ground conclusion, the rule that ends it, a tuple
of finite premises (forced on demand) and, for allR, exL and the minor
premises of muL, an indexed family: a total function from ground index
terms to schemas, memoized on the canonical index.

The module provides the grounding translation of finitary derivations,
renaming along per-formula nominal permutations, unfolding of inductive
predicates, one-step cut reduction and fuel-bounded normalization.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

from .calculus import (
    LEFT_TAGS,
    CheckResult,
    Derivation,
    Rule,
    RuleError,
    Sequent,
    backward_apply,
    check_sequent,
    derive_init,
    hyp_key,
    perm_derivation,
    replace_const,
)
from .formulas import open_body, pred_of, view
from .terms import (
    IDENTITY,
    Nom,
    Perm,
    Term,
    TermError,
    Type,
    Var,
    _replace_vars,
    abstract_nom,
    apply,
    apply_perm,
    contains_const,
    enumerate_ground,
    find_perm,
    free_vars,
    fresh_nominal,
    infer_type,
    nom_name,
    normalize_term,
    show,
    spine,
    support,
    support_list,
)
from .theory import Theory, TheoryError, defn_premises, positive_only
from .unify import OPEN, unify_terms

RIGHT_TAGS = {"topR", "impR", "andR", "orR1", "orR2", "allR", "exR", "nablaR", "defR", "muR"}
FAMILY_TAGS = {"allR", "exL", "muL"}
LABELS = (
    "n=0",
    "red-1-1", "red-1-2", "red-1-3", "red-1-4", "red-1-5", "red-1-6", "red-1-7", "red-1-8",
    "red-2-1", "red-2-2", "red-2-3",
    "red-3-1", "red-3-2", "red-3-3", "red-3-4", "red-3-5",
    "red-4-1", "red-4-2",
    "red-5-1", "red-5-2",
    "red-6-1", "red-6-2",
)


class GroundingError(Exception):
    pass


class ReductionError(Exception):
    pass


class PositivityError(ReductionError):
    pass


# ---------------------------------------------------------------- schemas


class Family:
    """A premise family indexed by tuples of ground terms."""

    def __init__(self, types: Sequence[Type], fn: Callable[..., "GDerivation"]):
        self.types = tuple(types)
        self._fn = fn
        self._memo: dict = {}

    def __call__(self, *idx: Term) -> "GDerivation":
        if len(idx) != len(self.types):
            raise GroundingError(f"family expects {len(self.types)} index terms")
        key = tuple(normalize_term(t) for t in idx)
        got = self._memo.get(key)
        if got is None:
            got = self._fn(*key)
            self._memo[key] = got
        return got

    def indices(self, sig: dict, max_size: int, cap: int) -> list[tuple]:
        pools = [enumerate_ground(sig, ty, max_size) for ty in self.types]
        return list(itertools.islice(itertools.product(*pools), cap))

    def mapped(self, f: Callable[["GDerivation"], "GDerivation"]) -> "Family":
        return Family(self.types, lambda *idx: f(self(*idx)))


class GDerivation:
    """A node of a ground derivation schema."""

    __slots__ = ("concl", "rule", "_prems", "family")

    def __init__(self, concl: Sequent, rule: Rule, premises: Iterable = (), family: Family | None = None):
        if concl.ctx:
            raise GroundingError("ground sequents have an empty context")
        self.concl = concl
        self.rule = rule
        self._prems = list(premises)
        self.family = family

    @property
    def premises(self) -> tuple:
        for i, p in enumerate(self._prems):
            if not isinstance(p, GDerivation):
                self._prems[i] = p()
        return tuple(self._prems)

    def premise(self, i: int) -> "GDerivation":
        p = self._prems[i]
        if not isinstance(p, GDerivation):
            p = self._prems[i] = p()
        return p

    @property
    def arity(self) -> int:
        return len(self._prems)

    def child(self, step) -> "GDerivation":
        if isinstance(step, int):
            return self.premise(step)
        if self.family is None:
            raise GroundingError("node has no premise family")
        return self.family(*step)

    def at(self, path: Sequence) -> "GDerivation":
        g = self
        for step in path:
            g = g.child(step)
        return g

    def __repr__(self) -> str:
        return f"<{self.rule.label()} {self.concl.render()}>"


def _node(concl: Sequent, rule: Rule, premises=(), family=None) -> GDerivation:
    return GDerivation(concl, rule, premises, family)


def gseq(hyps: Iterable[Term], concl: Term) -> Sequent:
    return Sequent.make((), list(hyps), concl)


def _remove(hyps: Sequence[Term], f: Term) -> list:
    out = list(hyps)
    try:
        out.remove(f)
    except ValueError:
        raise ReductionError(f"{show(f)} is not a hypothesis") from None
    return out


def _at_principal(concl: Sequent, rule: Rule, principal: Term) -> Rule:
    return replace(rule, pos=concl.index_of(principal))


def mk_mc(subs: Sequence[GDerivation], major: GDerivation) -> GDerivation:
    """mc(P1, ..., Pn, P) with the cut formulas read off the Pi."""
    cuts = tuple(s.concl.concl for s in subs)
    gamma = list(major.concl.hyps)
    for c in cuts:
        gamma = _remove(gamma, c)
    tagged = [(h, j + 1) for j, s in enumerate(subs) for h in s.concl.hyps]
    tagged += [(h, 0) for h in gamma]
    tagged.sort(key=lambda p: hyp_key(p[0]))
    concl = Sequent((), tuple(h for h, _ in tagged), major.concl.concl)
    return _node(concl, Rule("mc", cuts=cuts, parts=tuple(p for _, p in tagged)), list(subs) + [major])


def _contract(goal: Sequent, extra: Sequence[Term], top: GDerivation) -> GDerivation:
    """cL steps from goal up to goal + extra."""
    seqs = [goal]
    cur = list(goal.hyps)
    for f in extra:
        cur.append(f)
        seqs.append(gseq(cur, goal.concl))
    if seqs[-1] != top.concl:
        raise ReductionError("contraction chain does not reach the premise")
    d = top
    for k in range(len(extra) - 1, -1, -1):
        s = seqs[k]
        d = _node(s, Rule("cL", pos=s.index_of(extra[k])), [d])
    return d


def _weaken(goal: Sequent, extra: Sequence[Term], top: GDerivation) -> GDerivation:
    """wL steps removing extra from goal down to the premise."""
    seqs = [goal]
    cur = list(goal.hyps)
    for f in extra:
        cur = _remove(cur, f)
        seqs.append(gseq(cur, goal.concl))
    if seqs[-1] != top.concl:
        raise ReductionError("weakening chain does not reach the premise")
    d = top
    for k in range(len(extra) - 1, -1, -1):
        s = seqs[k]
        d = _node(s, Rule("wL", pos=s.index_of(extra[k])), [d])
    return d


# ---------------------------------------------------------------- expected premises


def ground_expected(th: Theory, g: GDerivation, idx: tuple | None = None) -> list[Sequent]:
    """Premise conclusions demanded by the ground rule schema.

    For allR and exL idx selects a family member; for muL idx selects a
    minor premise and None asks for the major premise.
    """
    goal, rule = g.concl, g.rule
    tag = rule.tag
    if tag == "allR":
        v = view(goal.concl)
        if v.kind != "forall":
            raise RuleError("allR: consequent is not universal")
        return [gseq(goal.hyps, open_body(v, _index_term(th, idx, [v.qty])[0]))]
    if tag == "exL":
        f = goal.hyps[rule.pos]
        v = view(f)
        if v.kind != "exists":
            raise RuleError("exL: principal formula is not existential")
        t = _index_term(th, idx, [v.qty])[0]
        return [gseq(goal.without(rule.pos) + [open_body(v, t)], goal.concl)]
    if tag == "muL":
        if idx is None:
            return backward_apply(goal, rule, th)[1:]
        f = goal.hyps[rule.pos]
        ind = th.inds.get(pred_of(f))
        if ind is None:
            raise RuleError("muL: principal formula is not an inductive atom")
        us = _index_term(th, idx, ind.arg_types())
        s = rule.inv
        return [gseq([ind.body_for(s, us)], normalize_term(apply(s, *us)))]
    return backward_apply(goal, rule, th)


def _index_term(th: Theory, idx, types) -> list:
    if idx is None or len(idx) != len(types):
        raise RuleError("family index has the wrong arity")
    for t, ty in zip(idx, types):
        if free_vars(t):
            raise RuleError("family index is not ground")
        try:
            got = infer_type(dict(th.sig), {}, t)
        except TermError as e:
            raise RuleError(f"ill-typed family index: {e}") from None
        if got != ty:
            raise RuleError(f"family index {show(t)} has type {got}, expected {ty}")
    return list(idx)


def family_types(th: Theory, g: GDerivation) -> tuple:
    tag = g.rule.tag
    if tag == "allR":
        return (view(g.concl.concl).qty,)
    if tag == "exL":
        return (view(g.concl.hyps[g.rule.pos]).qty,)
    if tag == "muL":
        return tuple(th.inds[pred_of(g.concl.hyps[g.rule.pos])].arg_types())
    return ()


# ---------------------------------------------------------------- grounding


def ground_derivation(d: Derivation, delta: dict, th: Theory) -> GDerivation:
    """Translate a finitary derivation under a grounding substitution."""
    ctx = d.concl.ctx
    names = {x for x, _ in ctx}
    extra = set(delta) - names
    if extra:
        raise GroundingError(f"substitution mentions unknown variable(s) {', '.join(sorted(extra))}")
    for x, ty in ctx:
        if x not in delta:
            raise GroundingError(f"variable {x} is not grounded")
        t = delta[x]
        if free_vars(t):
            raise GroundingError(f"term for {x} is not ground")
        try:
            got = infer_type(dict(th.sig), {}, t)
        except TermError as e:
            raise GroundingError(f"term for {x}: {e}") from None
        if got != ty:
            raise GroundingError(f"term for {x} has type {got}, expected {ty}")
    return _ground(d, {x: normalize_term(t) for x, t in delta.items()}, th)


def _sub(t: Term, delta: dict) -> Term:
    return normalize_term(_replace_vars(t, delta)) if delta else t


def _lambda_over(t: Term, noms: Sequence[Nom]) -> Term:
    body = t
    for n in reversed(noms):
        body = abstract_nom(body, n)
    return normalize_term(body)


def _ground(d: Derivation, delta: dict, th: Theory) -> GDerivation:
    s = d.concl
    hyps = [_sub(h, delta) for h in s.hyps]
    C = _sub(s.concl, delta)
    goal = gseq(hyps, C)
    r = d.rule
    tag = r.tag
    kw: dict = {"var": None}
    principal = None
    if r.pos is not None:
        principal = _sub(s.hyps[r.pos], delta)
        kw["pos"] = goal.index_of(principal)
    if r.term is not None:
        kw["term"] = _sub(r.term, delta)
    rule = replace(r, **kw)

    if tag == "mc":
        return mk_mc([_ground(p, delta, th) for p in d.premises[:-1]], _ground(d.premises[-1], delta, th))
    if tag in ("allR", "exL"):
        v = view(s.concl) if tag == "allR" else view(s.hyps[r.pos])
        noms = support_list(v.body)
        prem = d.premises[0]
        y = r.var

        def member(t: Term, prem=prem, y=y, noms=noms) -> GDerivation:
            d2 = dict(delta)
            d2[y] = _lambda_over(t, noms)
            return _ground(prem, d2, th)

        return _node(goal, rule, (), Family((v.qty,), member))
    if tag == "muL":
        ind = th.inds[pred_of(s.hyps[r.pos])]
        minor, major = d.premises
        params = [x for x, _ in ind.params]

        def minor_member(*us: Term) -> GDerivation:
            return _ground(minor, dict(zip(params, us)), th)

        return _node(goal, rule, [lambda: _ground(major, delta, th)], Family(ind.arg_types(), minor_member))
    if tag == "Ax":
        pi = r.perm or IDENTITY
        if apply_perm(hyps[0], pi) != C:
            pi = find_perm(hyps[0], C)
            if pi is None:
                raise GroundingError("grounding broke an axiom: the instances are not renamings")
            rule = replace(rule, perm=pi)
        return _node(goal, rule)
    if tag in ("nablaR", "nablaL"):
        return _ground_nabla(d, delta, th, goal, rule, principal)
    if tag == "defL":
        return _ground_defl(d, delta, th, goal, rule, principal)
    return _node(goal, rule, [(lambda p=p: _ground(p, delta, th)) for p in d.premises])


def _ground_defl(d, delta, th, goal, rule, atom) -> GDerivation:
    s = d.concl
    old_atom = s.hyps[d.rule.pos]
    fin = defn_premises(th, old_atom, s.ctx_map)
    by_clause = {fp.clause: (k, fp) for k, fp in enumerate(fin)}
    prems = []
    for gp in defn_premises(th, atom, {}):
        if gp.clause not in by_clause:
            raise GroundingError(f"ground instance matches clause {gp.clause} but the derivation has no such case")
        k, fp = by_clause[gp.clause]
        pairs = [(fp.theta[y], delta[y]) for y, _ in s.ctx]
        classes = {x: OPEN for x, _ in fp.range_ctx}
        sigma = unify_terms(pairs, classes)
        if sigma is None:
            raise GroundingError("cannot factor the grounding through the case substitution")
        d2 = {x: normalize_term(sigma.get(x, Var(x, ty))) for x, ty in fp.range_ctx}
        if any(free_vars(t) for t in d2.values()):
            raise GroundingError("case substitution leaves variables unground")
        prems.append(lambda p=d.premises[k], d2=d2: _ground(p, d2, th))
    return _node(goal, rule, prems)


def _ground_nabla(d, delta, th, goal, rule, principal) -> GDerivation:
    s = d.concl
    r = d.rule
    n = r.nom
    f = s.concl if r.tag == "nablaR" else s.hyps[r.pos]
    body = view(_sub(f, delta)).body
    prem = d.premises[0]
    if n not in support(body):
        return _node(goal, rule, [lambda: _ground(prem, delta, th)])
    # the grounding captured the nominal: swap it for a fresh one and rename back
    avoid = set(goal.support()) | set(s.support()) | {n}
    for t in delta.values():
        avoid |= support(t)
    m = fresh_nominal(n.ty, avoid)
    pi = Perm.swap(n, m)
    swapped = perm_derivation(prem, pi)
    inner = _ground(swapped, delta, th)
    hyps2 = [_sub(apply_perm(h, pi), delta) for h in s.hyps]
    conc2 = _sub(apply_perm(s.concl, pi), delta)
    goal2 = gseq(hyps2, conc2)
    princ2 = conc2 if r.tag == "nablaR" else _sub(apply_perm(s.hyps[r.pos], pi), delta)
    kw = {"nom": m}
    if r.tag == "nablaL":
        kw["pos"] = goal2.index_of(princ2)
    g2 = _node(goal2, replace(rule, **kw), [inner])
    old = [_sub(h, delta) for h in s.hyps]
    try:
        return rename_derivation(g2, _align(goal2.hyps, hyps2, old), _sub(s.concl, delta))
    except GroundingError as e:
        raise GroundingError(f"nominal capture at {r.label()} cannot be repaired: {e}") from None


def _align(sorted_hyps, src, dst) -> list:
    """Reorder dst so that it follows sorted_hyps, where src[i] corresponds to dst[i]."""
    pool = list(zip(src, dst))
    out = []
    for h in sorted_hyps:
        for i, (a, b) in enumerate(pool):
            if a == h:
                out.append(b)
                pool.pop(i)
                break
    return out


# ---------------------------------------------------------------- renaming


def rename_derivation(g: GDerivation, new_hyps: Sequence[Term], new_concl: Term) -> GDerivation:
    """A similar schema for the renamed sequent.

    new_hyps[i] must be a nominal renaming of g.concl.hyps[i] and new_concl
    a renaming of the consequent.
    """
    if len(new_hyps) != len(g.concl.hyps):
        raise GroundingError("renaming must pair every hypothesis")
    entries = []
    for old, new in zip(g.concl.hyps, new_hyps):
        pi = find_perm(old, new)
        if pi is None:
            raise GroundingError(f"{show(new)} is not a renaming of {show(old)}")
        entries.append((old, pi))
    cp = find_perm(g.concl.concl, new_concl)
    if cp is None:
        raise GroundingError(f"{show(new_concl)} is not a renaming of {show(g.concl.concl)}")
    return _rename(g, entries, cp)


def perm_gderivation(g: GDerivation, pi: Perm) -> GDerivation:
    """Apply one permutation to every formula of a schema."""
    if pi.is_identity():
        return g
    return _rename(g, [(h, pi) for h in g.concl.hyps], pi)


def _take(entries: list, f: Term) -> tuple[Perm, list]:
    for i, (h, pi) in enumerate(entries):
        if h == f:
            return pi, entries[:i] + entries[i + 1:]
    raise GroundingError(f"renaming has no entry for {show(f)}")


def _rename(g: GDerivation, entries: list, cp: Perm) -> GDerivation:
    if cp.is_identity() and all(pi.is_identity() for _, pi in entries):
        return g
    hyps = [apply_perm(h, pi) for h, pi in entries]
    C = g.concl.concl
    goal = gseq(hyps, apply_perm(C, cp))
    r = g.rule
    tag = r.tag

    def ren(p, ents, c) -> Callable[[], GDerivation]:
        return lambda: _rename(p if isinstance(p, GDerivation) else p(), ents, c)

    if tag == "mc":
        subs, major = g.premises[:-1], g.premises[-1]
        pool = list(entries)
        by_part: dict[int, list] = {}
        for h, part in zip(g.concl.hyps, r.parts):
            pi, pool = _take(pool, h)
            by_part.setdefault(part, []).append((h, pi))
        new_subs = [_rename(s, by_part.get(j + 1, []), IDENTITY) for j, s in enumerate(subs)]
        cut_entries = [(c, IDENTITY) for c in r.cuts]
        return mk_mc(new_subs, _rename(major, cut_entries + by_part.get(0, []), cp))
    if tag in RIGHT_TAGS:
        v = view(C)
        kw = {}
        ents = entries
        if tag == "impR":
            ents = entries + [(v.left, cp)]
        if tag == "exR":
            kw["term"] = apply_perm(r.term, cp)
        if tag == "nablaR":
            kw["nom"] = cp(r.nom)
        rule = replace(r, **kw)
        fam = None
        if tag == "allR":
            inv = cp.inverse()
            fam = Family(g.family.types, lambda t: _rename(g.family(apply_perm(t, inv)), entries, cp))
        return _node(goal, rule, [ren(p, ents, cp) for p in g._prems], fam)
    if tag == "Ax":
        (h, sigma), = entries
        pi = sigma.inverse().then(r.perm or IDENTITY).then(cp)
        return _node(goal, replace(r, perm=pi))
    # left rules
    f = g.concl.hyps[r.pos]
    sigma, rest = _take(entries, f)
    fs = apply_perm(f, sigma)
    v = view(f)
    rule = replace(r, pos=goal.index_of(fs))
    if tag == "botL":
        return _node(goal, rule)
    if tag == "cL":
        return _node(goal, rule, [ren(g._prems[0], entries + [(f, sigma)], cp)])
    if tag == "wL":
        return _node(goal, rule, [ren(g._prems[0], rest, cp)])
    if tag == "impL":
        return _node(goal, rule, [ren(g._prems[0], rest, sigma), ren(g._prems[1], rest + [(v.right, sigma)], cp)])
    if tag in ("andL1", "andL2"):
        part = v.left if tag == "andL1" else v.right
        return _node(goal, rule, [ren(g._prems[0], rest + [(part, sigma)], cp)])
    if tag == "orL":
        return _node(goal, rule, [ren(g._prems[0], rest + [(v.left, sigma)], cp), ren(g._prems[1], rest + [(v.right, sigma)], cp)])
    if tag == "allL":
        rule = replace(rule, term=apply_perm(r.term, sigma))
        return _node(goal, rule, [ren(g._prems[0], rest + [(open_body(v, r.term), sigma)], cp)])
    if tag == "exL":
        inv = sigma.inverse()

        def member(t):
            t0 = apply_perm(t, inv)
            return _rename(g.family(t0), rest + [(open_body(v, t0), sigma)], cp)

        return _node(goal, rule, (), Family(g.family.types, member))
    if tag == "nablaL":
        rule = replace(rule, nom=sigma(r.nom))
        return _node(goal, rule, [ren(g._prems[0], rest + [(open_body(v, r.nom), sigma)], cp)])
    if tag == "defL":
        out = []
        for p in g.premises:
            # the case body is the hypothesis of the premise that is not in rest
            extra = list(p.concl.hyps)
            for h, _ in rest:
                extra = _remove(extra, h)
            (body,) = extra
            out.append(ren(p, rest + [(body, sigma)], cp))
        return _node(goal, rule, out)
    if tag == "muL":
        s = r.inv
        st = normalize_term(apply(s, *v.args))
        fam = g.family
        if support(s):
            rule = replace(rule, inv=apply_perm(s, sigma))
            inv = sigma.inverse()
            fam = Family(fam.types, lambda *us: perm_gderivation(g.family(*[apply_perm(u, inv) for u in us]), sigma))
        return _node(goal, rule, [ren(g._prems[0], rest + [(st, sigma)], cp)], fam)
    raise GroundingError(f"cannot rename a {r.label()} node")


# ---------------------------------------------------------------- unfolding


def unfold_mu(th: Theory, xi: GDerivation, pred: str, inv: Term, minors: Family) -> GDerivation:
    """From a schema of D |- C p build one of D |- C S.

    p must occur only positively in the consequent; minors(u) derives
    B S u |- S u.
    """
    if not th.is_inductive(pred):
        raise PositivityError(f"{pred} is not inductively defined")
    if support(inv):
        raise PositivityError("the invariant must not mention nominal constants")
    if not positive_only(xi.concl.concl, pred):
        raise PositivityError(f"{pred} occurs negatively in {show(xi.concl.concl)}")
    return _unfold(th, xi, pred, inv, minors)


def _unfold(th: Theory, x: GDerivation, p: str, s: Term, minors: Family) -> GDerivation:
    C = x.concl.concl
    if not contains_const(C, p):
        return x
    C2 = replace_const(C, p, s)
    goal = Sequent((), x.concl.hyps, C2)
    r = x.rule
    tag = r.tag

    def u(prem) -> Callable[[], GDerivation]:
        return lambda: _unfold(th, prem if isinstance(prem, GDerivation) else prem(), p, s, minors)

    if tag == "Ax":
        h = x.concl.hyps[0]
        if pred_of(h) != p:
            raise PositivityError(f"{p} occurs inside a term")
        st = replace_const(h, p, s)
        init = ground_derivation(derive_init(th, (), st, r.perm or IDENTITY), {}, th)
        return _node(goal, Rule("muL", pos=0, inv=s), [init], minors)
    if tag == "muR" and pred_of(C) == p:
        _, args = spine(C)
        return mk_mc([_unfold(th, x.premise(0), p, s, minors)], minors(*args))
    if tag == "impR" and contains_const(view(C).left, p):
        raise PositivityError(f"{p} occurs in the antecedent of an implication")
    if tag == "mc":
        prems = x.premises
        return mk_mc(list(prems[:-1]), _unfold(th, prems[-1], p, s, minors))
    if tag in RIGHT_TAGS:
        fam = None
        if x.family is not None:
            fam = x.family.mapped(lambda m: _unfold(th, m, p, s, minors))
        return _node(goal, r, [u(q) for q in x._prems], fam)
    if tag == "botL":
        return _node(goal, r)
    if tag == "impL":
        return _node(goal, r, [x._prems[0], u(x._prems[1])])
    if tag == "muL":
        return _node(goal, r, [u(x._prems[0])], x.family)
    if tag in LEFT_TAGS:
        fam = None
        if x.family is not None:
            fam = x.family.mapped(lambda m: _unfold(th, m, p, s, minors))
        return _node(goal, r, [u(q) for q in x._prems], fam)
    raise PositivityError(f"cannot unfold through {r.label()}")


# ---------------------------------------------------------------- reduction


@dataclass(frozen=True)
class Strategy:
    """How normalization chooses redexes.

    order is "root-first" or "innermost"; cut_choice decides which of
    several equal cut formulas a principal rule is taken to introduce.
    """

    name: str = "default"
    order: str = "root-first"
    cut_choice: str = "leftmost"

    def pick(self, cuts: Sequence[Term], f: Term) -> int | None:
        idx = [i for i, c in enumerate(cuts) if c == f]
        if not idx:
            return None
        return idx[0] if self.cut_choice == "leftmost" else idx[-1]


STRATEGIES = {
    "default": Strategy(),
    "innermost": Strategy("innermost", order="innermost"),
    "rightmost": Strategy("rightmost", cut_choice="rightmost"),
}
DEFAULT = STRATEGIES["default"]


@dataclass
class Reduction:
    result: GDerivation
    label: str
    cut_positions: tuple = ()
    note: str = ""
    spine_cuts: tuple = ()  # new multicuts whose major premise comes from the redex's major premise
    inner: "Reduction | None" = None  # red-4-1: the reduction performed on the cut premise


def reduce_step(xi: GDerivation, th: Theory, strategy: Strategy = DEFAULT) -> Reduction:
    """One reduction of a multicut-rooted schema."""
    if xi.rule.tag != "mc":
        raise ReductionError("the root is not a multicut")
    prems = xi.premises
    subs, major = list(prems[:-1]), prems[-1]
    if not subs:
        return Reduction(major, "n=0")
    cuts = [s.concl.concl for s in subs]
    r = major.rule
    tag = r.tag
    if tag == "Ax":
        if len(subs) != 1 or len(major.concl.hyps) != 1:
            raise ReductionError("internal: axiom premise with a context")
        b, c = major.concl.hyps[0], major.concl.concl
        pi = find_perm(b, c)
        res = _rename(subs[0], [(h, IDENTITY) for h in subs[0].concl.hyps], pi)
        return Reduction(res, "red-6-2", (0,), _perm_note(pi))
    if tag == "mc":
        return _right_multicut(xi, subs, major)
    if tag in LEFT_TAGS:
        f = major.concl.hyps[r.pos]
        i = strategy.pick(cuts, f)
        if i is None:
            return _right_commute(xi, subs, major, f)
        if tag in ("cL", "wL"):
            return _structural(xi, subs, major, i)
        st = subs[i].rule.tag
        if st == "Ax":
            return _left_axiom(xi, subs, major, i)
        if tag == "muL":
            return _inductive(th, xi, subs, major, i)
        if st in RIGHT_TAGS:
            return _essential(th, xi, subs, major, i)
        if st == "mc":
            inner = reduce_step(subs[i], th, strategy)
            new = list(subs)
            new[i] = inner.result
            out = mk_mc(new, major)
            depth, base = 1, inner
            while base.label == "red-4-1":
                depth, base = depth + 1, base.inner
            note = f"inner {base.label}" + (f" at depth {depth}" if depth > 1 else "")
            return Reduction(out, "red-4-1", (i,), note, (out,), inner)
        if st in LEFT_TAGS:
            return _left_commute(xi, subs, major, i)
        raise ReductionError(f"internal: no case for {subs[i].rule.label()}/{r.label()}")
    if tag in RIGHT_TAGS:
        return _right_commute(xi, subs, major, None)
    raise ReductionError(f"internal: unknown rule {tag}")


def _perm_note(pi: Perm | None) -> str:
    if pi is None or pi.is_identity():
        return ""
    return "perm " + ", ".join(f"{nom_name(a)}->{nom_name(b)}" for a, b in pi.pairs)


def _with(subs: list, i: int, x: GDerivation) -> list:
    out = list(subs)
    out[i] = x
    return out


def _without(subs: list, i: int) -> list:
    return subs[:i] + subs[i + 1:]


def _essential(th, xi, subs, major, i) -> Reduction:
    sub = subs[i]
    st, mt = sub.rule.tag, major.rule.tag
    pair = (st, mt)
    if st == "andR" and mt in ("andL1", "andL2"):
        k = 0 if mt == "andL1" else 1
        out = mk_mc(_with(subs, i, sub.premise(k)), major.premise(0))
        return Reduction(out, "red-1-1", (i,), "", (out,))
    if st in ("orR1", "orR2") and mt == "orL":
        k = 0 if st == "orR1" else 1
        out = mk_mc(_with(subs, i, sub.premise(0)), major.premise(k))
        return Reduction(out, "red-1-2", (i,), "", (out,))
    if pair == ("impR", "impL"):
        others = _without(subs, i)
        xi1 = mk_mc(others, major.premise(0))
        inner = mk_mc([xi1], sub.premise(0))
        outer = mk_mc(_with(subs, i, inner), major.premise(1))
        extra = [h for s in others for h in s.concl.hyps]
        gamma = list(major.concl.hyps)
        for c in [s.concl.concl for s in subs]:
            gamma = _remove(gamma, c)
        out = _contract(xi.concl, extra + gamma, outer)
        return Reduction(out, "red-1-3", (i,), "", (outer,))
    if pair == ("allR", "allL"):
        out = mk_mc(_with(subs, i, sub.family(major.rule.term)), major.premise(0))
        return Reduction(out, "red-1-4", (i,), f"at {show(major.rule.term)}", (out,))
    if pair == ("exR", "exL"):
        out = mk_mc(_with(subs, i, sub.premise(0)), major.family(sub.rule.term))
        return Reduction(out, "red-1-5", (i,), f"at {show(sub.rule.term)}", (out,))
    if pair == ("defR", "defL"):
        atom = major.concl.hyps[major.rule.pos]
        clauses = [dp.clause for dp in defn_premises(th, atom, {})]
        k = sub.rule.clause
        if k not in clauses:
            raise ReductionError("internal: the right rule's clause has no left case")
        out = mk_mc(_with(subs, i, sub.premise(0)), major.premise(clauses.index(k)))
        return Reduction(out, "red-1-6", (i,), f"clause {k}", (out,))
    if pair == ("nablaR", "nablaL"):
        n, m = sub.rule.nom, major.rule.nom
        p1 = sub.premise(0)
        pi = IDENTITY if n == m else Perm.swap(n, m)
        p1 = _rename(p1, [(h, IDENTITY) for h in p1.concl.hyps], pi)
        out = mk_mc(_with(subs, i, p1), major.premise(0))
        return Reduction(out, "red-1-7", (i,), _perm_note(pi), (out,))
    raise ReductionError(f"internal: {sub.rule.label()} does not match {major.rule.label()}")


def _inductive(th, xi, subs, major, i) -> Reduction:
    atom = major.concl.hyps[major.rule.pos]
    p = pred_of(atom)
    unfolded = unfold_mu(th, subs[i], p, major.rule.inv, major.family)
    out = mk_mc(_with(subs, i, unfolded), major.premise(0))
    return Reduction(out, "red-1-8", (i,), "", (out,))


def _left_commute(xi, subs, major, i) -> Reduction:
    sub = subs[i]
    r = sub.rule
    f = sub.concl.hyps[r.pos]
    rule = _at_principal(xi.concl, r, f)
    if r.tag == "impL":
        minor, maj = sub.premise(0), sub.premise(1)
        xi1 = mk_mc(_with(subs, i, maj), major)
        rest = _remove(xi.concl.hyps, f)
        goal = gseq(rest, view(f).left)
        extra = list(rest)
        for h in minor.concl.hyps:
            extra = _remove(extra, h)
        w = _weaken(goal, extra, minor)
        return Reduction(_node(xi.concl, rule, [w, xi1]), "red-2-2", (i,), "", (xi1,))
    if r.tag == "muL":
        xi1 = mk_mc(_with(subs, i, sub.premise(0)), major)
        return Reduction(_node(xi.concl, rule, [xi1], sub.family), "red-2-3", (i,), "", (xi1,))
    prems = [mk_mc(_with(subs, i, q), major) for q in sub.premises]
    fam = None
    if sub.family is not None:
        fam = sub.family.mapped(lambda m: mk_mc(_with(subs, i, m), major))
    return Reduction(_node(xi.concl, rule, prems, fam), "red-2-1", (i,), "", tuple(prems))


def _right_commute(xi, subs, major, f) -> Reduction:
    r = major.rule
    rule = r if f is None else _at_principal(xi.concl, r, f)
    if r.tag == "muL":
        xi1 = mk_mc(subs, major.premise(0))
        return Reduction(_node(xi.concl, rule, [xi1], major.family), "red-3-3", (), "", (xi1,))
    prems = [mk_mc(subs, q) for q in major.premises]
    fam = None
    if major.family is not None:
        fam = major.family.mapped(lambda m: mk_mc(subs, m))
    if r.tag == "impL":
        label = "red-3-2"
    elif r.tag == "impR":
        label = "red-3-4"
    elif r.tag in RIGHT_TAGS:
        label = "red-3-5"
    else:
        label = "red-3-1"
    return Reduction(_node(xi.concl, rule, prems, fam), label, (), "", tuple(prems))


def _structural(xi, subs, major, i) -> Reduction:
    delta = list(subs[i].concl.hyps)
    if major.rule.tag == "cL":
        inner = mk_mc(subs[: i + 1] + [subs[i]] + subs[i + 1:], major.premise(0))
        return Reduction(_contract(xi.concl, delta, inner), "red-5-1", (i,), "", (inner,))
    inner = mk_mc(_without(subs, i), major.premise(0))
    return Reduction(_weaken(xi.concl, delta, inner), "red-5-2", (i,), "", (inner,))


def _left_axiom(xi, subs, major, i) -> Reduction:
    (b1,) = subs[i].concl.hyps
    b = subs[i].concl.concl
    pi = find_perm(b, b1)  # b[pi] = b1
    f = major.concl.hyps[major.rule.pos]
    entries = [(h, IDENTITY) for h in major.concl.hyps]
    entries[major.rule.pos] = (f, pi)
    renamed = _rename(major, entries, IDENTITY)
    out = mk_mc(_without(subs, i), renamed)
    return Reduction(out, "red-6-1", (i,), _perm_note(pi), (out,))


def _right_multicut(xi, subs, major) -> Reduction:
    inner_prems = major.premises
    inner_subs, inner_major = list(inner_prems[:-1]), inner_prems[-1]
    used = set()
    part_of = []
    for s in subs:
        c = s.concl.concl
        for k, h in enumerate(major.concl.hyps):
            if h == c and k not in used:
                used.add(k)
                part_of.append(major.rule.parts[k])
                break
        else:
            raise ReductionError("internal: cut formula missing from the major premise")
    groups = []
    for j in range(1, len(inner_subs) + 1):
        mine = [s for s, q in zip(subs, part_of) if q == j]
        groups.append(mk_mc(mine, inner_subs[j - 1]))
    rest = [s for s, q in zip(subs, part_of) if q == 0]
    out = mk_mc(groups + rest, inner_major)
    return Reduction(out, "red-4-2", tuple(range(len(subs))), "", (out, *groups))


# ---------------------------------------------------------------- normalization


@dataclass
class TraceStep:
    step: int
    path: tuple
    label: str
    cut_positions: tuple
    conclusion: str
    note: str = ""

    def to_json(self) -> str:
        return json.dumps(
            {
                "step": self.step,
                "path": [_path_elem(p) for p in self.path],
                "case": self.label,
                "cuts": list(self.cut_positions),
                "conclusion": self.conclusion,
                **({"note": self.note} if self.note else {}),
            },
            ensure_ascii=False,
        )


def _path_elem(p):
    if isinstance(p, int):
        return p
    return [show(t) for t in p]


@dataclass
class ReductionTrace:
    steps: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.steps)

    def labels(self) -> list:
        return [s.label for s in self.steps]

    def to_jsonl(self) -> str:
        return "".join(s.to_json() + "\n" for s in self.steps)

    @staticmethod
    def from_jsonl(text: str) -> list[dict]:
        return [json.loads(line) for line in text.splitlines() if line.strip()]


@dataclass
class NormalForm:
    status: str  # "cutfree", "exhausted", or "stuck" when unfolding is undefined
    derivation: GDerivation | None
    trace: ReductionTrace
    fuel_used: int
    reason: str = ""

    @property
    def cutfree(self) -> bool:
        return self.status == "cutfree"


class _Exhausted(Exception):
    pass


def normalize(
    xi: GDerivation,
    th: Theory,
    fuel: int = 1000,
    explore_depth: int = 3,
    samples: int = 8,
    max_term_size: int = 3,
    strategy: Strategy = DEFAULT,
) -> NormalForm:
    """Reduce until no multicut is left within the explored slice, or fuel runs out."""
    if fuel < 1:
        raise ValueError("fuel must be at least 1")
    trace = ReductionTrace()
    used = [0]
    sig = dict(th.sig)

    def reduce_here(g: GDerivation, path: tuple) -> GDerivation:
        if used[0] >= fuel:
            raise _Exhausted
        red = reduce_step(g, th, strategy)
        used[0] += 1
        trace.steps.append(
            TraceStep(used[0], path, red.label, red.cut_positions, red.result.concl.render(), red.note)
        )
        return red.result

    def go(g: GDerivation, path: tuple, depth: int) -> GDerivation:
        while g.rule.tag == "mc":
            if strategy.order == "innermost" and depth < explore_depth:
                g = _rebuild(g, path, depth)
            g = reduce_here(g, path)
        if depth >= explore_depth:
            return g
        return _rebuild(g, path, depth)

    def _rebuild(g: GDerivation, path: tuple, depth: int) -> GDerivation:
        prems = [go(p, path + (i,), depth + 1) for i, p in enumerate(g.premises)]
        fam = g.family
        if fam is not None:
            done = {}
            for idx in fam.indices(sig, max_term_size, samples):
                done[idx] = go(fam(*idx), path + (idx,), depth + 1)
            old = fam
            fam = Family(old.types, lambda *idx: done.get(tuple(idx)) or old(*idx))
            fam._memo.update(done)
        if g.rule.tag == "mc":
            return mk_mc(prems[:-1], prems[-1])
        return _node(g.concl, g.rule, prems, fam)

    try:
        out = go(xi, (), 0)
    except _Exhausted:
        return NormalForm("exhausted", None, trace, used[0])
    except PositivityError as e:
        return NormalForm("stuck", None, trace, used[0], str(e))
    return NormalForm("cutfree", out, trace, used[0])


def slice_nodes(g: GDerivation, th: Theory, depth: int, samples: int = 8, max_term_size: int = 3):
    """Yield (path, node) for nodes within depth, sampling families."""
    sig = dict(th.sig)
    stack = [((), g, 0)]
    while stack:
        path, node, d = stack.pop()
        yield path, node
        if d >= depth:
            continue
        kids = [(path + (i,), p) for i, p in enumerate(node.premises)]
        if node.family is not None:
            kids += [(path + (idx,), node.family(*idx)) for idx in node.family.indices(sig, max_term_size, samples)]
        for p, k in reversed(kids):
            stack.append((p, k, d + 1))


def has_cut(g: GDerivation, th: Theory, depth: int, samples: int = 8, max_term_size: int = 3) -> bool:
    return any(n.rule.tag == "mc" for _, n in slice_nodes(g, th, depth, samples, max_term_size))


def slice_check(
    g: GDerivation, th: Theory, depth: int = 3, samples: int = 8, max_term_size: int = 3
) -> CheckResult:
    """Check rule-schema conformance of every node within depth."""
    sig = dict(th.sig)
    stack = [((), g, 0)]
    try:
        check_sequent(th, g.concl)
    except (RuleError, TermError) as e:
        return CheckResult(False, (), str(e))
    while stack:
        path, node, d = stack.pop()
        label = node.rule.label()
        kids = []
        try:
            if node.concl.ctx:
                raise RuleError("ground sequent has a context")
            tag = node.rule.tag
            if tag in FAMILY_TAGS:
                if node.family is None:
                    raise RuleError("missing premise family")
                types = family_types(th, node)
                if node.family.types != types:
                    raise RuleError("premise family is indexed by the wrong types")
                for idx in node.family.indices(sig, max_term_size, samples):
                    member = node.family(*idx)
                    (want,) = ground_expected(th, node, idx)
                    if member.concl != want:
                        return CheckResult(
                            False, path + (idx,),
                            f"{label}: premise at {', '.join(map(show, idx))} should be {want.render()} but is {member.concl.render()}",
                        )
                    kids.append((path + (idx,), member))
            elif node.family is not None:
                raise RuleError("unexpected premise family")
            want = [] if tag in ("allR", "exL") else ground_expected(th, node)
            got = node.premises
            if len(want) != len(got):
                what = "premise set incomplete" if len(got) < len(want) else "too many premises"
                return CheckResult(False, path, f"{label}: {what} ({len(got)} given, {len(want)} expected)")
            for i, (w, p) in enumerate(zip(want, got)):
                if w != p.concl:
                    return CheckResult(
                        False, path + (i,), f"{label}: premise {i} should be {w.render()} but is {p.concl.render()}"
                    )
                kids.append((path + (i,), p))
        except (RuleError, TheoryError, TermError, GroundingError, ReductionError) as e:
            return CheckResult(False, path, f"{label}: {e}")
        if d < depth:
            for p, k in reversed(kids):
                stack.append((p, k, d + 1))
    return CheckResult(True)


# ---------------------------------------------------------------- slice statistics


def slice_index(g: GDerivation, th: Theory, depth: int = 64, samples: int = 2, max_term_size: int = 2) -> int:
    """Largest number of muL nodes on a branch of the explored slice."""
    sig = dict(th.sig)

    def go(n: GDerivation, d: int) -> int:
        here = 1 if n.rule.tag == "muL" else 0
        if d >= depth:
            return here
        kids = list(n.premises)
        if n.family is not None:
            kids += [n.family(*idx) for idx in n.family.indices(sig, max_term_size, samples)]
        return here + max((go(k, d + 1) for k in kids), default=0)

    return go(g, 0)


def similar(a: GDerivation, b: GDerivation, th: Theory, depth: int = 6, samples: int = 3, max_term_size: int = 2) -> bool:
    """Renaming similarity on a slice: same rules, conclusions related by renaming."""
    sig = dict(th.sig)

    def equiv(x: Sequent, y: Sequent) -> bool:
        if find_perm(x.concl, y.concl) is None or len(x.hyps) != len(y.hyps):
            return False
        pool = list(y.hyps)
        for h in x.hyps:
            for i, h2 in enumerate(pool):
                if find_perm(h, h2) is not None:
                    pool.pop(i)
                    break
            else:
                return False
        return True

    def go(x: GDerivation, y: GDerivation, d: int) -> bool:
        if x.rule.tag != y.rule.tag or not equiv(x.concl, y.concl):
            return False
        if x.arity != y.arity or (x.family is None) != (y.family is None):
            return False
        if d >= depth:
            return True
        if not all(go(p, q, d + 1) for p, q in zip(x.premises, y.premises)):
            return False
        if x.family is not None:
            for idx in x.family.indices(sig, max_term_size, samples):
                if not go(x.family(*idx), y.family(*idx), d + 1):
                    return False
        return True

    return go(a, b, 0)


def replay_trace(xi: GDerivation, th: Theory, records: list[dict], strategy: Strategy = DEFAULT, **kw) -> bool:
    """Re-run normalization and compare against recorded steps."""
    nf = normalize(xi, th, strategy=strategy, **kw)
    if len(nf.trace.steps) != len(records):
        return False
    for st, rec in zip(nf.trace.steps, records):
        if st.label != rec["case"] or st.conclusion != rec["conclusion"]:
            return False
    return True
