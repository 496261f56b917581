"""Definitions, inductive definitions, measures, levels and stratification."""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .formulas import mk_conj, mk_disj, mk_quant_var, view, open_body
from .ordinal import ZERO, Ordinal, omax
from .terms import (
    PROP,
    TOP,
    Const,
    Nom,
    Term,
    Type,
    Var,
    apply,
    apply_subst,
    arrow,
    beta_apply,
    contains_const,
    enumerate_ground,
    free_vars,
    fresh_name,
    fresh_nominal,
    show,
    spine,
    support,
    type_of,
)
from .unify import OPEN, is_pattern, rename_apart, unify_terms, unify_with_head


class TheoryError(Exception):
    pass


# ---------------------------------------------------------------- measures


@dataclass(frozen=True)
class MNat:
    value: int


@dataclass(frozen=True)
class MRef:
    measure: str
    var: str


@dataclass(frozen=True)
class MAdd:
    left: "MExpr"
    right: "MExpr"


@dataclass(frozen=True)
class MMax:
    left: "MExpr"
    right: "MExpr"


MExpr = MNat | MRef | MAdd | MMax


def show_mexpr(e: MExpr, top: bool = True) -> str:
    if isinstance(e, MNat):
        return str(e.value)
    if isinstance(e, MRef):
        return f"{e.measure} {e.var}"
    if isinstance(e, MMax):
        return f"max({show_mexpr(e.left)}, {show_mexpr(e.right)})"
    s = f"{show_mexpr(e.left, False)} + {show_mexpr(e.right, False)}"
    return s if top else f"({s})" if isinstance(e.right, MAdd) else s


@dataclass(frozen=True)
class MeasureEq:
    constructor: str
    params: tuple  # variable names, one per constructor argument
    expr: MExpr


@dataclass(frozen=True)
class MeasureDef:
    name: str
    ty: Type
    equations: tuple  # of MeasureEq, in declaration order

    def equation(self, c: str) -> MeasureEq | None:
        for e in self.equations:
            if e.constructor == c:
                return e
        return None


@dataclass(frozen=True)
class LevelDecl:
    predicate: str
    params: tuple
    expr: MExpr


# ---------------------------------------------------------------- level expressions


@dataclass(frozen=True)
class Mono:
    """const + sum of measure atoms; atoms are (measure, term) pairs."""

    const: Ordinal
    atoms: tuple = ()

    def add(self, other: "Mono") -> "Mono":
        return Mono(self.const.nsum(other.const), tuple(sorted(self.atoms + other.atoms, key=_atom_key)))

    def mentions(self, name: str) -> bool:
        return any(name in free_vars(t) for _, t in self.atoms)

    def leq(self, other: "Mono") -> bool:
        """self <= other under every valuation of the atoms."""
        a, b = self.const.infinite_part(), other.const.infinite_part()
        if a < b:
            return True
        if a != b:
            return False
        ca, cb = Counter(self.atoms), Counter(other.atoms)
        if any(ca[k] > cb[k] for k in ca):
            return False
        return self.const.finite_part() <= other.const.finite_part()

    def render(self) -> str:
        parts = [f"{m} {_show_arg(t)}" for m, t in self.atoms]
        if self.const != ZERO or not parts:
            parts.append(str(self.const))
        return " + ".join(parts)


def _atom_key(a):
    return (a[0], show(a[1]))


def _show_arg(t: Term) -> str:
    s = show(t, annotate=False)
    return s if " " not in s else f"({s})"


@dataclass(frozen=True)
class LevelExpr:
    """max of monomials; the empty max is 0."""

    monos: tuple = ()

    @staticmethod
    def const(o: Ordinal) -> "LevelExpr":
        return LevelExpr((Mono(o),))._simp()

    @staticmethod
    def atom(measure: str, t: Term) -> "LevelExpr":
        return LevelExpr((Mono(ZERO, ((measure, t),)),))

    def _simp(self) -> "LevelExpr":
        ms = list(dict.fromkeys(self.monos))
        keep = []
        for i, m in enumerate(ms):
            dominated = any(j != i and m.leq(o) for j, o in enumerate(ms))
            if not dominated:
                keep.append(m)
        keep.sort(key=lambda m: (m.render()))
        return LevelExpr(tuple(keep))

    def max(self, other: "LevelExpr") -> "LevelExpr":
        return LevelExpr(self.monos + other.monos)._simp()

    def add(self, other: "LevelExpr") -> "LevelExpr":
        a = self.monos or (Mono(ZERO),)
        b = other.monos or (Mono(ZERO),)
        return LevelExpr(tuple(x.add(y) for x in a for y in b))._simp()

    def succ(self) -> "LevelExpr":
        return self.add(LevelExpr.const(Ordinal.nat(1)))

    def mentions(self, name: str) -> bool:
        return any(m.mentions(name) for m in self.monos)

    def sup_over(self, name: str) -> "LevelExpr":
        """Conservative sup over all values of the variable `name`."""
        out = []
        for m in self.monos:
            if m.mentions(name):
                out.append(Mono(m.const.sup_omega()))
            else:
                out.append(m)
        return LevelExpr(tuple(out))._simp()

    def is_const(self) -> bool:
        return all(not m.atoms for m in self.monos)

    def value(self) -> Ordinal:
        if not self.is_const():
            raise TheoryError(f"level {self.render()} is not constant")
        return omax(*[m.const for m in self.monos])

    def leq(self, other: "LevelExpr") -> bool:
        mine = self.monos or (Mono(ZERO),)
        theirs = other.monos or (Mono(ZERO),)
        return all(any(m.leq(o) for o in theirs) for m in mine)

    def render(self) -> str:
        if not self.monos:
            return "0"
        if len(self.monos) == 1:
            return self.monos[0].render()
        return "max(" + ", ".join(m.render() for m in self.monos) + ")"


# ---------------------------------------------------------------- definitions


@dataclass(frozen=True)
class Clause:
    head: Term
    body: Term
    ctx: tuple  # ((name, type), ...)

    @property
    def ctx_map(self) -> dict:
        return dict(self.ctx)


@dataclass
class Definition:
    predicate: str
    clauses: list = field(default_factory=list)


@dataclass(frozen=True)
class InductiveDefinition:
    predicate: str
    pred_const: Const
    params: tuple  # ((name, type), ...)
    operator: Term  # closed, of type (tys -> o) -> tys -> o

    def body_for(self, s: Term, args: Sequence[Term]) -> Term:
        """B S t1 ... tn, normalized."""
        return beta_apply(self.operator, s, *args)

    def arg_types(self) -> list:
        return [ty for _, ty in self.params]


@dataclass
class Theory:
    kinds: list = field(default_factory=list)
    sig: dict = field(default_factory=dict)
    measures: dict = field(default_factory=dict)
    levels: dict = field(default_factory=dict)
    defs: dict = field(default_factory=dict)
    inds: dict = field(default_factory=dict)
    unsafe: bool = False

    def clauses_for(self, pred: str, atom: Term | None = None) -> list[Clause]:
        if pred == "eq":
            if atom is None:
                raise TheoryError("eq clause needs an atom to fix its type")
            h, args = spine(atom)
            ty = type_of(args[0])
            x = Var("X", ty)
            return [Clause(apply(Const("eq", arrow(ty, ty, PROP)), x, x), TOP, (("X", ty),))]
        d = self.defs.get(pred)
        return list(d.clauses) if d else []

    def is_defined(self, pred: str | None) -> bool:
        return pred == "eq" or pred in self.defs

    def is_inductive(self, pred: str | None) -> bool:
        return pred in self.inds


def validate_clause(c: Clause) -> None:
    ctx = c.ctx_map
    hv = free_vars(c.head)
    missing = [x for x in ctx if x not in hv]
    if missing:
        raise TheoryError(f"clause variable(s) {', '.join(missing)} do not occur in the head")
    for x in free_vars(c.body):
        if x not in ctx:
            raise TheoryError(f"body variable {x} is not a clause variable")
    if support(c.head) or support(c.body):
        raise TheoryError("clause must have empty support")
    if not is_pattern(c.head, ctx):
        raise TheoryError(f"clause head {show(c.head)} is not a pattern")
    if view(c.head).kind != "atom" or view(c.head).pred is None:
        raise TheoryError("clause head must be an atom with a predicate constant")


# ---------------------------------------------------------------- measures and levels


def measure_term(th: Theory, mname: str, t: Term) -> LevelExpr:
    """Symbolic measure of a possibly open term."""
    m = th.measures.get(mname)
    if m is None:
        raise TheoryError(f"unknown measure {mname}")
    h, args = spine(t)
    if isinstance(h, Nom):
        return LevelExpr.const(ZERO)
    if isinstance(h, Var):
        return LevelExpr.atom(mname, t)
    if isinstance(h, Const):
        eq = m.equation(h.name)
        if eq is None:
            raise TheoryError(f"measure {mname} has no equation for constructor {h.name}")
        env = dict(zip(eq.params, args))
        return _eval_mexpr(th, eq.expr, env)
    raise TheoryError(f"cannot measure {show(t)}")


def _eval_mexpr(th: Theory, e: MExpr, env: Mapping[str, Term]) -> LevelExpr:
    if isinstance(e, MNat):
        return LevelExpr.const(Ordinal.nat(e.value))
    if isinstance(e, MRef):
        if e.var not in env:
            raise TheoryError(f"measure expression mentions unknown variable {e.var}")
        return measure_term(th, e.measure, env[e.var])
    if isinstance(e, MAdd):
        return _eval_mexpr(th, e.left, env).add(_eval_mexpr(th, e.right, env))
    return _eval_mexpr(th, e.left, env).max(_eval_mexpr(th, e.right, env))


def eval_measure(th: Theory, mname: str, t: Term) -> int:
    """Value of a measure on a ground term."""
    v = measure_term(th, mname, t).value()
    if not v.is_finite():
        raise TheoryError("measure is not finite")
    return v.finite_part()


_qcount = itertools.count(1)


def level_of_open(th: Theory, f: Term) -> LevelExpr:
    v = view(f)
    k = v.kind
    if k in ("bot", "top"):
        return LevelExpr.const(ZERO)
    if k in ("and", "or"):
        return level_of_open(th, v.left).max(level_of_open(th, v.right))
    if k == "imp":
        return level_of_open(th, v.left).succ().max(level_of_open(th, v.right))
    if k in ("forall", "exists"):
        name = f"_q{next(_qcount)}"
        body = open_body(v, Var(name, v.qty))
        return level_of_open(th, body).sup_over(name)
    if k == "nabla":
        n = fresh_nominal(v.qty, support(f))
        return level_of_open(th, open_body(v, n))
    decl = th.levels.get(v.pred)
    if decl is None:
        return LevelExpr.const(ZERO)
    env = dict(zip(decl.params, v.args))
    return _eval_mexpr(th, decl.expr, env)


def level_of_ground(th: Theory, f: Term) -> Ordinal:
    if free_vars(f):
        raise TheoryError("level_of_ground expects a ground formula")
    return level_of_open(th, f).value()


# ---------------------------------------------------------------- stratification


@dataclass
class Verdict:
    predicate: str
    index: int  # clause index, -1 for an inductive definition
    verdict: str  # accept | reject | cannot-verify
    head_level: str
    body_level: str
    reason: str
    witness: dict | None = None

    def line(self) -> str:
        return f"{self.predicate}\t{self.index}\t{self.verdict}\t{self.reason}"


def _groundings(th: Theory, ctx: Sequence[tuple], max_size: int, cap: int):
    pools = []
    for _, ty in ctx:
        pools.append(enumerate_ground(th.sig, ty, max_size))
    for i, combo in enumerate(itertools.product(*pools)):
        if i >= cap:
            return
        yield {x: t for (x, _), t in zip(ctx, combo)}


def _check_levels(th: Theory, pred: str, idx: int, head: Term, body: Term, ctx) -> Verdict:
    try:
        he = level_of_open(th, head)
        be = level_of_open(th, body)
    except TheoryError as e:
        return Verdict(pred, idx, "cannot-verify", "?", "?", str(e))
    chain = f"lvl(body) = {_sup_step(th, body, ctx)}{be.render()} <= {he.render()} = lvl(head)"
    if be.leq(he):
        return Verdict(pred, idx, "accept", he.render(), be.render(), chain)
    for rho in _groundings(th, ctx, 4, 400):
        hg = level_of_open(th, apply_subst(head, rho)).value()
        bg = level_of_open(th, apply_subst(body, rho)).value()
        if not bg <= hg:
            w = {x: show(t) for x, t in rho.items()}
            inst = ", ".join(f"{x} := {t}" for x, t in w.items()) or "no variables"
            return Verdict(
                pred, idx, "reject", he.render(), be.render(),
                f"lvl(body) = {bg} > {hg} = lvl(head) at {inst}", w,
            )
    return Verdict(pred, idx, "cannot-verify", he.render(), be.render(),
                   f"could not show {be.render()} <= {he.render()}")


def _sup_step(th: Theory, body: Term, ctx) -> str:
    """'sup_{x,y} L = ' for a body under leading quantifiers, else ''."""
    names: list = []
    used = {x for x, _ in ctx}
    f = body
    v = view(f)
    while v.kind in ("forall", "exists"):
        nm = fresh_name(v.body.hint or "x", used)
        used.add(nm)
        names.append(nm)
        f = open_body(v, Var(nm, v.qty))
        v = view(f)
    if not names:
        return ""
    return f"sup_{{{','.join(names)}}} {level_of_open(th, f).render()} = "


def check_weak_strat(th: Theory, defs: Iterable[Definition] | None = None) -> list[Verdict]:
    out = []
    for d in defs if defs is not None else th.defs.values():
        for i, c in enumerate(d.clauses):
            out.append(_check_levels(th, d.predicate, i, c.head, c.body, c.ctx))
    return out


def positive_only(f: Term, pred: str, positive: bool = True) -> bool:
    v = view(f)
    if v.kind in ("and", "or"):
        return positive_only(v.left, pred, positive) and positive_only(v.right, pred, positive)
    if v.kind == "imp":
        return positive_only(v.left, pred, not positive) and positive_only(v.right, pred, positive)
    if v.kind in ("forall", "exists", "nabla"):
        return positive_only(v.body.body, pred, positive)
    if v.kind == "atom":
        if v.pred == pred:
            return positive and not any(contains_const(a, pred) for a in v.args)
        return not any(contains_const(a, pred) for a in v.args)
    return True


def check_strict_strat(th: Theory, inds: Iterable[InductiveDefinition] | None = None) -> list[Verdict]:
    out = []
    for ind in inds if inds is not None else th.inds.values():
        p = ind.predicate
        xs = [Var(x, ty) for x, ty in ind.params]
        head = apply(ind.pred_const, *xs)
        body = ind.body_for(ind.pred_const, xs)
        problems = []
        he = level_of_open(th, head)
        if not he.is_const():
            problems.append(f"level {he.render()} depends on the arguments")
        v = _check_levels(th, p, -1, head, body, ind.params)
        if v.verdict != "accept":
            problems.append(v.reason)
        if not positive_only(body, p):
            problems.append(f"{p} occurs negatively in its operator body")
        if problems:
            out.append(Verdict(p, -1, "reject", v.head_level, v.body_level, "; ".join(problems), v.witness))
        else:
            out.append(Verdict(p, -1, "accept", v.head_level, v.body_level, v.reason))
    return out


# ---------------------------------------------------------------- fixed-point form


def eq_atom(a: Term, b: Term) -> Term:
    ty = type_of(a)
    return apply(Const("eq", arrow(ty, ty, PROP)), a, b)


def clausal_to_fixedpoint(d: Definition) -> Clause:
    """Single clause p x1..xk := disjunction of exists-eq-conjunctions."""
    if not d.clauses:
        raise TheoryError("empty definition")
    h0, args0 = spine(d.clauses[0].head)
    taken = set()
    for c in d.clauses:
        taken.update(x for x, _ in c.ctx)
    xs = []
    for i, a in enumerate(args0):
        nm = fresh_name(f"x{i + 1}", taken)
        taken.add(nm)
        xs.append(Var(nm, type_of(a)))
    disjuncts = []
    for c in d.clauses:
        _, targs = spine(c.head)
        f = mk_conj([eq_atom(x, t) for x, t in zip(xs, targs)] + [c.body])
        for name, ty in reversed(c.ctx):
            f = mk_quant_var("exists", name, ty, f)
        disjuncts.append(f)
    head = apply(h0, *xs)
    return Clause(head, mk_disj(disjuncts), tuple((x.name, x.ty) for x in xs))


# ---------------------------------------------------------------- defn


@dataclass(frozen=True)
class DefnPremise:
    clause: int
    theta: dict
    range_ctx: tuple
    body: Term


def defn_premises(th: Theory, a: Term, a_ctx: Mapping[str, Type]) -> list[DefnPremise]:
    """Case analysis of atom a against every clause of its predicate."""
    pred = view(a).pred
    if not th.is_defined(pred):
        raise TheoryError(f"{pred} is not a defined predicate")
    out = []
    for i, c in enumerate(th.clauses_for(pred, a)):
        r = unify_with_head(a, a_ctx, c.head, c.ctx_map)
        if r is None:
            continue
        out.append(DefnPremise(i, r.theta, r.range_ctx, apply_subst(c.body, r.rho)))
    return out


def defn_instance(th: Theory, a: Term, a_ctx: Mapping[str, Type], clause: int) -> Term | None:
    """B' with defn(clause, a, identity, B'), i.e. a is an instance of the head."""
    pred = view(a).pred
    cs = th.clauses_for(pred, a)
    if not 0 <= clause < len(cs):
        return None
    c = cs[clause]
    # the atom's variables stay rigid; only clause variables are solved
    ren = rename_apart(c.ctx_map)
    head = apply_subst(c.head, ren)
    sigma = unify_terms([(head, a)], {v.name: OPEN for v in ren.values()})
    if sigma is None:
        return None
    rho = {x: sigma.get(v.name, v) for x, v in ren.items()}
    if apply_subst(c.head, rho) != a:
        return None
    return apply_subst(c.body, rho)
