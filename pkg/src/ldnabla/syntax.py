"""Surface syntax: parsing with lark, an AST and a canonical printer."""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from typing import Union

from lark import Lark, Token, Transformer, v_args
from lark.exceptions import UnexpectedInput, VisitError

from .terms import Arrow, Base, Type
from .theory import MAdd, MMax, MNat, MRef, show_mexpr


class SyntaxErr(Exception):
    def __init__(self, msg: str, line: int | None = None, column: int | None = None):
        where = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(where + msg)
        self.line = line
        self.column = column


# ---------------------------------------------------------------- expressions


@dataclass(frozen=True)
class SName:
    name: str


@dataclass(frozen=True)
class SNom:
    index: int
    ty: Type


@dataclass(frozen=True)
class SApp:
    head: "SExpr"
    args: tuple


@dataclass(frozen=True)
class SBin:
    op: str  # imp | or | and
    left: "SExpr"
    right: "SExpr"


@dataclass(frozen=True)
class SBind:
    kind: str  # forall | exists | nabla | lam
    binds: tuple  # ((name, type or None), ...)
    body: "SExpr"


SExpr = Union[SName, SNom, SApp, SBin, SBind]


# ---------------------------------------------------------------- items


@dataclass
class Comment:
    text: str
    line: int = field(default=0, compare=False)


@dataclass
class KindDecl:
    name: str
    line: int = field(default=0, compare=False)


@dataclass
class TypeDecl:
    name: str
    ty: Type
    line: int = field(default=0, compare=False)


@dataclass
class MeasureDecl:
    name: str
    ty: Type
    equations: list  # (constructor, params, mexpr)
    line: int = field(default=0, compare=False)


@dataclass
class LevelItem:
    predicate: str
    params: tuple
    expr: object
    line: int = field(default=0, compare=False)


@dataclass
class DefineDecl:
    predicate: str
    clauses: list  # (head, body)
    line: int = field(default=0, compare=False)


@dataclass
class InductiveDecl:
    predicate: str
    params: tuple
    body: SExpr
    line: int = field(default=0, compare=False)


@dataclass
class SGoal:
    ctx: tuple  # ((name, type), ...)
    hyps: tuple
    concl: SExpr
    sequent: bool  # written as [ctx; hyps |- concl]


@dataclass
class Step:
    tag: str
    args: tuple  # (kind, value) pairs
    goal: int | None = None
    line: int = field(default=0, compare=False)
    indent: int = field(default=0, compare=False)  # layout only: nesting level in the source


@dataclass
class TheoremDecl:
    name: str
    goal: SGoal
    steps: list
    line: int = field(default=0, compare=False)


@dataclass
class Pragma:
    name: str
    line: int = field(default=0, compare=False)


@dataclass
class ExportDecl:
    theory: str
    goal: SGoal
    ground: list  # (name, expr)
    steps: list
    line: int = field(default=0, compare=False)


@dataclass
class TheoryFile:
    items: list

    def of(self, cls) -> list:
        return [i for i in self.items if isinstance(i, cls)]

    @property
    def unsafe(self) -> bool:
        return any(isinstance(i, Pragma) and i.name == "unsafe" for i in self.items)


# ---------------------------------------------------------------- parsing

_QUANT = {"forall": "forall", "∀": "forall", "exists": "exists", "∃": "exists", "nabla": "nabla", "∇": "nabla"}
_NAMES = {"⊤": "true", "⊥": "false"}


def _line(meta) -> int:
    return getattr(meta, "line", 0) or 0


@v_args(inline=True)
class _ToAst(Transformer):
    # types
    def tbase(self, n):
        return Base(str(n))

    def tarrow(self, a, b):
        return Arrow(a, b)

    # expressions
    def name(self, n):
        s = str(n)
        return SName(_NAMES.get(s, s))

    def nom(self, pfx, ty):
        return SNom(int(str(pfx)[1:-1]), ty)

    def app(self, *parts):
        if len(parts) == 1:
            return parts[0]
        head, args = parts[0], parts[1:]
        if isinstance(head, SApp):
            return SApp(head.head, head.args + tuple(args))
        return SApp(head, tuple(args))

    def imp(self, a, _op, b):
        return SBin("imp", a, b)

    def disj(self, a, _op, b):
        return SBin("or", a, b)

    def conj(self, a, _op, b):
        return SBin("and", a, b)

    def bind(self, n, ty=None):
        return (str(n), ty)

    def binds(self, *bs):
        return tuple(bs)

    def quant(self, q, binds, body):
        return SBind(_QUANT[str(q)], binds, body)

    def lam(self, _l, binds, body):
        return SBind("lam", binds, body)

    # measures
    def mnat(self, n):
        return MNat(int(n))

    def mref(self, m, x):
        return MRef(str(m), str(x))

    def madd(self, a, b):
        return MAdd(a, b)

    def mmax(self, a, b):
        return MMax(a, b)

    def mpat_const(self, c):
        return (str(c), ())

    def mpat_app(self, c, *xs):
        return (str(c), tuple(str(x) for x in xs))

    def meq(self, m, pat, e):
        return (str(m), pat[0], pat[1], e)

    # goals and steps
    def ctx(self, *xs):
        return tuple((str(xs[i]), xs[i + 1]) for i in range(0, len(xs), 2))

    def hyps(self, *fs):
        return tuple(fs)

    def sequent(self, ctx, hyps, _t, concl):
        return SGoal(ctx, hyps, concl, True)

    def goal_formula(self, f):
        return SGoal((), (), f, False)

    def goal_sequent(self, s):
        return s

    def sint(self, n):
        return ("int", int(n))

    def sname(self, n):
        return ("name", str(n))

    def sterm(self, f):
        return ("term", f)

    def scuts(self, *fs):
        return ("cuts", tuple(fs))

    def pair(self, a, b):
        return (a, b)

    def sperm(self, *ps):
        return ("perm", tuple(ps))

    def clause(self, h, b):
        return (h, b)

    def gbind(self, n, e):
        return (str(n), e)

    def ground(self, *bs):
        return list(bs)


class _Items(_ToAst):
    @v_args(meta=True)
    def step(self, meta, children):
        goal = None
        if children and isinstance(children[0], Token) and children[0].type == "INT":
            goal = int(children[0])
            children = children[1:]
        tag = str(children[0])
        args = []
        for a in children[1:]:
            args.append(("nom", a) if isinstance(a, SNom) else a)
        col = getattr(meta, "column", 3) or 3
        return Step(tag, tuple(args), goal, _line(meta), max(0, (col - 3) // 2))

    @v_args(meta=True)
    def kind_decl(self, meta, ch):
        return KindDecl(str(ch[0]), _line(meta))

    @v_args(meta=True)
    def type_decl(self, meta, ch):
        return TypeDecl(str(ch[0]), ch[1], _line(meta))

    @v_args(meta=True)
    def measure_decl(self, meta, ch):
        name, ty, eqs = str(ch[0]), ch[1], ch[2:]
        out = []
        for m, c, params, e in eqs:
            if m != name:
                raise SyntaxErr(f"equation for measure {m} inside measure {name}", _line(meta))
            out.append((c, params, e))
        return MeasureDecl(name, ty, out, _line(meta))

    @v_args(meta=True)
    def level_decl(self, meta, ch):
        return LevelItem(str(ch[0]), tuple(str(x) for x in ch[1:-1]), ch[-1], _line(meta))

    @v_args(meta=True)
    def define_decl(self, meta, ch):
        return DefineDecl(str(ch[0]), list(ch[1:]), _line(meta))

    @v_args(meta=True)
    def inductive_decl(self, meta, ch):
        return InductiveDecl(str(ch[0]), tuple(str(x) for x in ch[1:-1]), ch[-1], _line(meta))

    @v_args(meta=True)
    def theorem_decl(self, meta, ch):
        return TheoremDecl(str(ch[0]), ch[1], list(ch[2:]), _line(meta))

    @v_args(meta=True)
    def pragma(self, meta, ch):
        return Pragma("unsafe", _line(meta))

    @v_args(meta=True)
    def export_decl(self, meta, ch):
        theory = str(ch[0])[1:-1]
        goal = ch[1]
        rest = list(ch[2:])
        ground = []
        if rest and isinstance(rest[0], list):
            ground = rest.pop(0)
        return ExportDecl(theory, goal, ground, rest, _line(meta))

    def start(self, *items):
        out = []
        for it in items:
            out.extend(it if isinstance(it, list) else [it])
        return out


_COMMENTS: list = []
_PARSER: Lark | None = None


def _parser() -> Lark:
    global _PARSER
    if _PARSER is None:
        text = resources.files("ldnabla").joinpath("grammar.lark").read_text(encoding="utf-8")
        _PARSER = Lark(
            text,
            parser="lalr",
            propagate_positions=True,
            maybe_placeholders=False,
            start=["start", "step", "goal", "ground"],
            lexer_callbacks={"COMMENT": _COMMENTS.append},
        )
    return _PARSER


def parse_theory(text: str) -> TheoryFile:
    """Parse a theory or export file.  Comments become items."""
    _COMMENTS.clear()
    try:
        tree = _parser().parse(text, start="start")
        items = _Items().transform(tree)
    except UnexpectedInput as e:
        raise SyntaxErr(_describe(e), e.line, e.column) from None
    except VisitError as e:
        if isinstance(e.orig_exc, SyntaxErr):
            raise e.orig_exc from None
        raise
    finally:
        comments = list(_COMMENTS)
        _COMMENTS.clear()
    out: list = []
    cs = [Comment(str(c)[1:].rstrip(), c.line) for c in comments]
    for it in items:
        while cs and cs[0].line <= it.line:
            out.append(cs.pop(0))
        out.append(it)
    out.extend(cs)
    return TheoryFile(out)


def _fragment(text: str, start: str):
    try:
        return _Items().transform(_parser().parse(text, start=start))
    except UnexpectedInput as e:
        raise SyntaxErr(_describe(e), e.line, e.column) from None


def parse_goal(text: str) -> SGoal:
    """A formula or a bracketed sequent, as written after a theorem name."""
    return _fragment(text, "goal")


def parse_ground(text: str) -> list:
    """Bindings 'x := t; ...' as (name, expression) pairs."""
    return _fragment(f"ground {text.strip().rstrip('.')}.", "ground")


def _describe(e: UnexpectedInput) -> str:
    tok = getattr(e, "token", None)
    if tok is not None:
        return f"unexpected {tok!s}" if str(tok) else "unexpected end of input"
    ch = getattr(e, "char", None)
    if ch is not None:
        return f"unexpected character {ch!r}"
    return "syntax error"


# ---------------------------------------------------------------- printing

_PREC = {"imp": 1, "or": 2, "and": 3}
_SYM = {"imp": "=>", "or": "\\/", "and": "/\\"}


def show_type_atom(ty: Type) -> str:
    return f"({ty})" if isinstance(ty, Arrow) else str(ty)


def show_nom(n: SNom) -> str:
    return f"n{n.index}@{show_type_atom(n.ty)}"


def show_expr(e: SExpr, prec: int = 0) -> str:
    if isinstance(e, SName):
        return e.name
    if isinstance(e, SNom):
        return show_nom(e)
    if isinstance(e, SApp):
        s = " ".join([show_expr(e.head, 10)] + [show_expr(a, 10) for a in e.args])
        return f"({s})" if prec >= 10 else s
    if isinstance(e, SBin):
        p = _PREC[e.op]
        s = f"{show_expr(e.left, p + 1)} {_SYM[e.op]} {show_expr(e.right, p)}"
        return f"({s})" if prec > p else s
    if isinstance(e, SBind):
        bs = ", ".join(n if t is None else f"{n}:{show_type_atom(t)}" for n, t in e.binds)
        head = "\\" if e.kind == "lam" else e.kind + " "
        s = f"{head}{bs}. {show_expr(e.body, 0)}"
        return f"({s})" if prec > 0 else s
    raise TypeError(e)


def show_goal(g: SGoal) -> str:
    if not g.sequent:
        return show_expr(g.concl)
    ctx = ", ".join(f"{x}:{t}" for x, t in g.ctx)
    hyps = ", ".join(show_expr(h) for h in g.hyps)
    return f"[{ctx}; {hyps}{' ' if hyps else ''}|- {show_expr(g.concl)}]"


def show_step(s: Step) -> str:
    parts = [s.tag]
    for kind, v in s.args:
        if kind == "int":
            parts.append(str(v))
        elif kind == "name":
            parts.append(v)
        elif kind == "nom":
            parts.append(show_nom(v))
        elif kind == "term":
            parts.append(f"({show_expr(v)})")
        elif kind == "cuts":
            parts.append("[" + "; ".join(show_expr(c) for c in v) + "]")
        elif kind == "perm":
            parts.append("{" + ", ".join(f"{show_nom(a)} -> {show_nom(b)}" for a, b in v) + "}")
    body = " ".join(parts)
    if s.goal is not None:
        body = f"@{s.goal} {body}"
    return body + "."


def _show_item(it) -> str:
    if isinstance(it, Comment):
        return f"%{it.text}"
    if isinstance(it, KindDecl):
        return f"kind {it.name}."
    if isinstance(it, TypeDecl):
        return f"type {it.name} {it.ty}."
    if isinstance(it, MeasureDecl):
        eqs = []
        for c, params, e in it.equations:
            pat = c if not params else f"({c} {' '.join(params)})"
            eqs.append(f"  {it.name} {pat} := {show_mexpr(e)}")
        return f"measure {it.name} : {it.ty} by\n" + ";\n".join(eqs) + "."
    if isinstance(it, LevelItem):
        ps = "".join(f" {p}" for p in it.params)
        return f"level {it.predicate}{ps} := {show_mexpr(it.expr)}."
    if isinstance(it, DefineDecl):
        cs = [f"  {show_expr(h)} := {show_expr(b)}" for h, b in it.clauses]
        return f"define {it.predicate} by\n" + ";\n".join(cs) + "."
    if isinstance(it, InductiveDecl):
        ps = "".join(f" {p}" for p in it.params)
        return f"inductive {it.predicate}{ps} := {show_expr(it.body)}."
    if isinstance(it, TheoremDecl):
        lines = [f"theorem {it.name} : {show_goal(it.goal)}", "proof"]
        lines += ["  " * (s.indent + 1) + show_step(s) for s in it.steps]
        lines.append("qed.")
        return "\n".join(lines)
    if isinstance(it, Pragma):
        return f"#{it.name}"
    if isinstance(it, ExportDecl):
        lines = [f'theory "{it.theory}".', f"sequent {show_goal(it.goal)}."]
        if it.ground:
            lines.append("ground " + "; ".join(f"{x} := {show_expr(e)}" for x, e in it.ground) + ".")
        lines.append("proof")
        lines += ["  " * (s.indent + 1) + show_step(s) for s in it.steps]
        lines.append("qed.")
        return "\n".join(lines)
    raise TypeError(it)


_COMPACT = (KindDecl, TypeDecl)


def print_theory(tf: TheoryFile) -> str:
    out = []
    prev = None
    for it in tf.items:
        if prev is not None:
            glue = isinstance(prev, Comment) or (isinstance(prev, _COMPACT) and isinstance(it, _COMPACT))
            glue = glue or (isinstance(prev, LevelItem) and isinstance(it, LevelItem))
            out.append("\n" if glue else "\n\n")
        out.append(_show_item(it))
        prev = it
    return "".join(out) + ("\n" if out else "")
