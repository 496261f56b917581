"""Elaboration of surface syntax into typed terms and theories, and the load gate."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Mapping

from .calculus import Sequent
from .formulas import view
from .syntax import (
    DefineDecl,
    InductiveDecl,
    KindDecl,
    LevelItem,
    MeasureDecl,
    SApp,
    SBin,
    SBind,
    SExpr,
    SGoal,
    SName,
    SNom,
    TheoremDecl,
    TheoryFile,
    TypeDecl,
)
from .terms import (
    AND,
    BOT,
    IMP,
    LOGICAL,
    OR,
    PROP,
    TOP,
    App,
    Arrow,
    Bound,
    Const,
    Lam,
    Nom,
    Term,
    Type,
    Var,
    abstract_var,
    apply,
    is_first_order,
    normalize_term,
    quant_const,
    split_type,
    support,
)
from .theory import (
    Clause,
    Definition,
    InductiveDefinition,
    LevelDecl,
    MAdd,
    MeasureDef,
    MeasureEq,
    MMax,
    MRef,
    Theory,
    TheoryError,
    check_strict_strat,
    check_weak_strat,
    validate_clause,
)

BANNER = "WARNING: unsound foundation (theory loaded with #unsafe; stratification checks failed)"


class ElabError(Exception):
    def __init__(self, msg: str, line: int | None = None):
        super().__init__(f"line {line}: {msg}" if line else msg)
        self.line = line


# ---------------------------------------------------------------- type inference


@dataclass(frozen=True)
class _Meta:
    id: int


_ids = itertools.count()


class _Types:
    def __init__(self) -> None:
        self.sub: dict[int, object] = {}

    def fresh(self) -> _Meta:
        return _Meta(next(_ids))

    def walk(self, t):
        while isinstance(t, _Meta) and t.id in self.sub:
            t = self.sub[t.id]
        return t

    def occurs(self, m: _Meta, t) -> bool:
        t = self.walk(t)
        if t == m:
            return True
        return isinstance(t, Arrow) and (self.occurs(m, t.dom) or self.occurs(m, t.cod))

    def unify(self, a, b, what: str) -> None:
        a, b = self.walk(a), self.walk(b)
        if a == b:
            return
        if isinstance(a, _Meta):
            if self.occurs(a, b):
                raise ElabError(f"cyclic type in {what}")
            self.sub[a.id] = b
            return
        if isinstance(b, _Meta):
            self.unify(b, a, what)
            return
        if isinstance(a, Arrow) and isinstance(b, Arrow):
            self.unify(a.dom, b.dom, what)
            self.unify(a.cod, b.cod, what)
            return
        raise ElabError(f"type mismatch in {what}: {self.show(a)} vs {self.show(b)}")

    def resolve(self, t, what: str) -> Type:
        t = self.walk(t)
        if isinstance(t, _Meta):
            raise ElabError(f"cannot infer the type of {what}")
        if isinstance(t, Arrow):
            return Arrow(self.resolve(t.dom, what), self.resolve(t.cod, what))
        return t

    def show(self, t) -> str:
        t = self.walk(t)
        if isinstance(t, _Meta):
            return f"?{t.id}"
        if isinstance(t, Arrow):
            d = self.show(t.dom)
            if isinstance(self.walk(t.dom), Arrow):
                d = f"({d})"
            return f"{d} -> {self.show(t.cod)}"
        return str(t)


@dataclass
class Scope:
    sig: Mapping[str, Type]
    ctx: Mapping[str, Type] = field(default_factory=dict)  # eigenvariables
    cvars: dict = field(default_factory=dict)  # clause variables: name -> type or meta
    allow_new: bool = False  # capitalised unknown names become clause variables


Builder = Callable[[], Term]


def _infer(e: SExpr, env: list, sc: Scope, ts: _Types) -> tuple[object, Builder]:
    if isinstance(e, SName):
        n = e.name
        for i, (bn, bty) in enumerate(env):
            if bn == n:
                return bty, lambda i=i, bty=bty: Bound(i, ts.resolve(bty, n))
        if n in sc.ctx:
            ty = sc.ctx[n]
            return ty, lambda: Var(n, ty)
        if n in sc.cvars:
            ty = sc.cvars[n]
            return ty, lambda: Var(n, ts.resolve(ty, f"variable {n}"))
        if n == "true":
            return PROP, lambda: TOP
        if n == "false":
            return PROP, lambda: BOT
        if n == "eq":
            a = ts.fresh()
            ty = Arrow(a, Arrow(a, PROP))
            return ty, lambda: Const("eq", ts.resolve(ty, "eq"))
        if n in sc.sig:
            ty = sc.sig[n]
            return ty, lambda: Const(n, ty)
        if sc.allow_new and n[0].isupper():
            m = ts.fresh()
            sc.cvars[n] = m
            return m, lambda: Var(n, ts.resolve(m, f"variable {n}"))
        raise ElabError(f"unbound name {n}")
    if isinstance(e, SNom):
        if not is_first_order(e.ty) or e.ty == PROP:
            raise ElabError("nominal constants must have a non-predicate first-order type")
        return e.ty, lambda: Nom(e.index, e.ty)
    if isinstance(e, SApp):
        hty, hb = _infer(e.head, env, sc, ts)
        builders = [hb]
        for a in e.args:
            aty, ab = _infer(a, env, sc, ts)
            r = ts.fresh()
            ts.unify(hty, Arrow(aty, r), "application")
            hty = r
            builders.append(ab)
        return hty, lambda: apply(*[b() for b in builders])
    if isinstance(e, SBin):
        lt, lb = _infer(e.left, env, sc, ts)
        rt, rb = _infer(e.right, env, sc, ts)
        ts.unify(lt, PROP, f"left operand of {e.op}")
        ts.unify(rt, PROP, f"right operand of {e.op}")
        c = {"imp": IMP, "or": OR, "and": AND}[e.op]
        return PROP, lambda: apply(c, lb(), rb())
    if isinstance(e, SBind):
        name, ty = e.binds[0]
        bty = ty if ty is not None else ts.fresh()
        rest = SBind(e.kind, e.binds[1:], e.body) if len(e.binds) > 1 else e.body
        body_ty, bb = _infer(rest, [(name, bty)] + env, sc, ts)
        if e.kind == "lam":
            return Arrow(bty, body_ty), lambda: Lam(ts.resolve(bty, name), bb(), name)
        ts.unify(body_ty, PROP, f"body of {e.kind}")

        def build(bty=bty, name=name, bb=bb, q=e.kind):
            t = ts.resolve(bty, f"bound variable {name}")
            return App(quant_const(q, t), Lam(t, bb(), name))

        return PROP, build
    raise ElabError(f"unexpected expression {e!r}")


def elab_term(e: SExpr, sc: Scope, expected: Type | None = None) -> Term:
    ts = _Types()
    ty, b = _infer(e, [], sc, ts)
    if expected is not None:
        ts.unify(ty, expected, "term")
    t = normalize_term(b())
    for n, m in list(sc.cvars.items()):
        sc.cvars[n] = ts.resolve(m, f"variable {n}")
    return t


def elab_formula(e: SExpr, sig, ctx=None) -> Term:
    return elab_term(e, Scope(sig, dict(ctx or {})), PROP)


def elab_goal(g: SGoal, sig) -> Sequent:
    ctx = []
    for x, ty in g.ctx:
        if not is_first_order(ty):
            raise ElabError(f"eigenvariable {x} must have a first-order type")
        ctx.append((x, ty))
    cm = dict(ctx)
    hyps = [elab_formula(h, sig, cm) for h in g.hyps]
    return Sequent.make(ctx, hyps, elab_formula(g.concl, sig, cm))


# ---------------------------------------------------------------- theories


@dataclass
class GateReport:
    verdicts: list
    unsafe: bool  # the file carries #unsafe
    loaded: bool
    banner: str | None = None

    @property
    def accepted(self) -> bool:
        return all(v.verdict == "accept" for v in self.verdicts)

    def lines(self) -> list[str]:
        return [v.line() for v in self.verdicts]


class GateRejected(Exception):
    def __init__(self, report: GateReport):
        bad = [v for v in report.verdicts if v.verdict != "accept"]
        super().__init__("stratification rejected: " + "; ".join(
            f"{v.predicate}[{v.index}] {v.verdict}: {v.reason}" for v in bad))
        self.report = report


def _check_type(ty: Type, kinds: set, line: int) -> None:
    if isinstance(ty, Arrow):
        _check_type(ty.dom, kinds, line)
        _check_type(ty.cod, kinds, line)
    elif ty.name != "o" and ty.name not in kinds:
        raise ElabError(f"unknown kind {ty.name}", line)


def _check_mexpr(e, params: tuple, measures: dict, line: int) -> None:
    if isinstance(e, MRef):
        if e.var not in params:
            raise ElabError(f"measure expression mentions unknown variable {e.var}", line)
        if e.measure not in measures:
            raise ElabError(f"unknown measure {e.measure}", line)
    elif isinstance(e, (MAdd, MMax)):
        _check_mexpr(e.left, params, measures, line)
        _check_mexpr(e.right, params, measures, line)


def elaborate(tf: TheoryFile) -> tuple[Theory, list]:
    """Theory and the elaborated theorems (name, Sequent, steps, line)."""
    th = Theory(unsafe=tf.unsafe)
    kinds: set = set()
    theorems = []
    for it in tf.items:
        line = getattr(it, "line", None)
        if isinstance(it, KindDecl):
            if it.name in kinds or it.name == "o":
                raise ElabError(f"kind {it.name} declared twice", line)
            kinds.add(it.name)
            th.kinds.append(it.name)
        elif isinstance(it, TypeDecl):
            if it.name in th.sig or it.name in LOGICAL or it.name == "eq":
                raise ElabError(f"constant {it.name} declared twice or reserved", line)
            _check_type(it.ty, kinds, line)
            th.sig[it.name] = it.ty
        elif isinstance(it, MeasureDecl):
            _check_type(it.ty, kinds, line)
            eqs = []
            th.measures[it.name] = MeasureDef(it.name, it.ty, ())
            for c, params, e in it.equations:
                cty = th.sig.get(c)
                if cty is None:
                    raise ElabError(f"unknown constructor {c}", line)
                args, target = split_type(cty)
                if target != it.ty or len(args) != len(params):
                    raise ElabError(f"equation for {c} does not match its type {cty}", line)
                _check_mexpr(e, params, th.measures, line)
                eqs.append(MeasureEq(c, params, e))
            th.measures[it.name] = MeasureDef(it.name, it.ty, tuple(eqs))
        elif isinstance(it, LevelItem):
            pty = th.sig.get(it.predicate)
            if pty is None:
                raise ElabError(f"unknown predicate {it.predicate}", line)
            args, target = split_type(pty)
            if target != PROP or len(args) != len(it.params):
                raise ElabError(f"level for {it.predicate} has the wrong number of parameters", line)
            _check_mexpr(it.expr, it.params, th.measures, line)
            th.levels[it.predicate] = LevelDecl(it.predicate, it.params, it.expr)
        elif isinstance(it, DefineDecl):
            th.defs[it.predicate] = _elab_define(th, it)
        elif isinstance(it, InductiveDecl):
            th.inds[it.predicate] = _elab_inductive(th, it)
        elif isinstance(it, TheoremDecl):
            try:
                goal = elab_goal(it.goal, th.sig)
            except ElabError as e:
                raise ElabError(str(e), line) from None
            theorems.append((it.name, goal, it.steps, line))
    return th, theorems


def _pred_type(th: Theory, p: str, line) -> Type:
    ty = th.sig.get(p)
    if ty is None:
        raise ElabError(f"undeclared predicate {p}", line)
    if split_type(ty)[1] != PROP:
        raise ElabError(f"{p} is not a predicate", line)
    if p in th.defs or p in th.inds:
        raise ElabError(f"{p} is defined twice", line)
    return ty


def _elab_define(th: Theory, it: DefineDecl) -> Definition:
    line = it.line
    _pred_type(th, it.predicate, line)
    d = Definition(it.predicate)
    for h, b in it.clauses:
        sc = Scope(th.sig, {}, {}, allow_new=True)
        try:
            ts = _Types()
            hty, hb = _infer(h, [], sc, ts)
            ts.unify(hty, PROP, "clause head")
            head_vars = set(sc.cvars)
            bty, bb = _infer(b, [], sc, ts)
            ts.unify(bty, PROP, "clause body")
            head, body = normalize_term(hb()), normalize_term(bb())
            ctx = tuple((x, ts.resolve(m, f"variable {x}")) for x, m in sc.cvars.items())
        except ElabError as e:
            raise ElabError(str(e), line) from None
        extra = [x for x, _ in ctx if x not in head_vars]
        if extra:
            raise ElabError(f"variable(s) {', '.join(extra)} occur only in the clause body", line)
        c = Clause(head, body, ctx)
        v = view(head)
        if v.kind != "atom" or v.pred != it.predicate:
            raise ElabError(f"clause head must be an atom of {it.predicate}", line)
        try:
            validate_clause(c)
        except TheoryError as e:
            raise ElabError(str(e), line) from None
        d.clauses.append(c)
    return d


def _elab_inductive(th: Theory, it: InductiveDecl) -> InductiveDefinition:
    line = it.line
    pty = _pred_type(th, it.predicate, line)
    args, _ = split_type(pty)
    if len(args) != len(it.params) or len(set(it.params)) != len(it.params):
        raise ElabError(f"inductive {it.predicate} needs {len(args)} distinct parameters", line)
    params = tuple(zip(it.params, args))
    for x, ty in params:
        if not is_first_order(ty):
            raise ElabError(f"parameter {x} must have a first-order type", line)
    sc = Scope(th.sig, dict(params))
    try:
        body = elab_term(it.body, sc, PROP)
    except ElabError as e:
        raise ElabError(str(e), line) from None
    if support(body):
        raise ElabError("inductive body must have empty support", line)
    pc = Const(it.predicate, pty)
    self_name = "_self"
    t = _const_to_var(body, it.predicate, Var(self_name, pty))
    for x, ty in reversed(params):
        t = abstract_var(t, x, ty)
    op = normalize_term(abstract_var(t, self_name, pty, "p"))
    return InductiveDefinition(it.predicate, pc, params, op)


def _const_to_var(t: Term, name: str, v: Var) -> Term:
    if isinstance(t, Const) and t.name == name:
        return v
    if isinstance(t, App):
        return App(_const_to_var(t.fn, name, v), _const_to_var(t.arg, name, v))
    if isinstance(t, Lam):
        return Lam(t.ty, _const_to_var(t.body, name, v), t.hint)
    return t


def gate(th: Theory, unsafe_ack: bool = False) -> GateReport:
    verdicts = check_weak_strat(th) + check_strict_strat(th)
    rep = GateReport(verdicts, th.unsafe, False)
    if rep.accepted:
        rep.loaded = True
    elif th.unsafe and unsafe_ack:
        rep.loaded = True
        rep.banner = BANNER
    return rep


def elaborate_and_gate(tf: TheoryFile, unsafe_ack: bool = False):
    """(theory, theorems, report); raises GateRejected if the theory may not be used."""
    th, theorems = elaborate(tf)
    rep = gate(th, unsafe_ack)
    if not rep.loaded:
        raise GateRejected(rep)
    return th, theorems, rep
