"""Formula constructors and a small view type for case analysis."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .terms import (
    AND,
    BOT,
    IMP,
    OR,
    PROP,
    QUANTS,
    TOP,
    Const,
    Lam,
    Term,
    Type,
    abstract_var,
    apply,
    instantiate,
    normalize_term,
    quant_const,
    spine,
    type_of,
)


def mk_and(a: Term, b: Term) -> Term:
    return App2(AND, a, b)


def mk_or(a: Term, b: Term) -> Term:
    return App2(OR, a, b)


def mk_imp(a: Term, b: Term) -> Term:
    return App2(IMP, a, b)


def App2(c: Const, a: Term, b: Term) -> Term:
    return apply(c, a, b)


def mk_quant(q: str, body: Lam) -> Term:
    return apply(quant_const(q, body.ty), body)


def mk_quant_var(q: str, name: str, ty: Type, body: Term) -> Term:
    """Bind the free variable `name` of body with quantifier q."""
    return normalize_term(mk_quant(q, abstract_var(body, name, ty)))


def mk_conj(parts: Sequence[Term]) -> Term:
    if not parts:
        return TOP
    out = parts[-1]
    for p in reversed(parts[:-1]):
        out = mk_and(p, out)
    return out


def mk_disj(parts: Sequence[Term]) -> Term:
    if not parts:
        return BOT
    out = parts[-1]
    for p in reversed(parts[:-1]):
        out = mk_or(p, out)
    return out


@dataclass(frozen=True)
class View:
    kind: str  # bot top and or imp forall exists nabla atom
    left: Term | None = None
    right: Term | None = None
    body: Lam | None = None
    pred: str | None = None
    args: tuple = ()

    @property
    def qty(self) -> Type:
        assert self.body is not None
        return self.body.ty


def view(f: Term) -> View:
    h, args = spine(f)
    if isinstance(h, Const):
        if h == BOT:
            return View("bot")
        if h == TOP:
            return View("top")
        if h.name in ("and", "or", "imp") and len(args) == 2:
            return View(h.name, args[0], args[1])
        if h.name in QUANTS and len(args) == 1 and isinstance(args[0], Lam):
            return View(h.name, body=args[0])
        return View("atom", pred=h.name, args=tuple(args))
    # head is a variable, nominal or bound index: treated as atomic
    return View("atom", pred=None, args=tuple(args))


def is_atomic(f: Term) -> bool:
    return view(f).kind == "atom"


def is_formula(f: Term) -> bool:
    try:
        return type_of(f) == PROP
    except Exception:
        return False


def open_body(v: View, t: Term) -> Term:
    """C[t/x] for a quantifier view."""
    assert v.body is not None
    return instantiate(v.body.body, t)


def pred_of(f: Term) -> str | None:
    v = view(f)
    return v.pred if v.kind == "atom" else None
