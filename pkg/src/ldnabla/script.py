"""Proof scripts, goal-directed proof states and the derivation export format."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .calculus import (
    Derivation,
    Rule,
    RuleError,
    Sequent,
    backward_apply,
    check_derivation,
    derive_init,
    derive_unfold_left,
)
from .elab import ElabError, Scope, elab_goal, elab_term, elaborate_and_gate
from .formulas import view
from .syntax import (
    Comment,
    ExportDecl,
    SName,
    SNom,
    Step,
    parse_theory,
    _parser,
    _Items,
    show_nom,
)
from .terms import (
    IDENTITY,
    PROP,
    Nom,
    Perm,
    TermError,
    find_perm,
    show,
)
from .theory import Theory, TheoryError
from .unify import PatternError


class ScriptError(Exception):
    def __init__(self, msg: str, step: int | None = None):
        super().__init__(f"step {step}: {msg}" if step is not None else msg)
        self.step = step


# ---------------------------------------------------------------- step interpretation

RIGHT_PLAIN = {"topR", "impR", "andR", "orR1", "orR2", "muR"}
LEFT_KIND = {
    "botL": "bot", "impL": "imp", "andL1": "and", "andL2": "and", "orL": "or",
    "allL": "forall", "exL": "exists", "nablaL": "nabla",
}


@dataclass(frozen=True)
class Macro:
    name: str  # init | unfold
    pos: int | None = None
    perm: Perm | None = None


def _term_arg(th: Theory, goal: Sequent, arg, expected=None):
    kind, v = arg
    if kind == "name":
        v = SName(v)
    elif kind != "term":
        raise ScriptError(f"expected a term, got {kind}")
    try:
        return elab_term(v, Scope(th.sig, goal.ctx_map), expected)
    except (ElabError, TermError) as e:
        raise ScriptError(str(e)) from None


def _nom_arg(arg) -> Nom:
    kind, v = arg
    if kind != "nom":
        raise ScriptError("expected a nominal constant")
    return Nom(v.index, v.ty)


def _hyp_arg(th: Theory, goal: Sequent, args: list, tag: str) -> int:
    if args and args[0][0] in ("int", "term"):
        kind, v = args.pop(0)
        if kind == "int":
            if not 0 <= v < len(goal.hyps):
                raise ScriptError(f"no hypothesis {v}")
            return v
        f = _term_arg(th, goal, (kind, v), PROP)
        if f not in goal.hyps:
            raise ScriptError(f"{show(f)} is not a hypothesis")
        return goal.hyps.index(f)
    want = LEFT_KIND.get(tag)
    for i, h in enumerate(goal.hyps):
        v = view(h)
        if want and v.kind == want:
            return i
        if tag == "defL" and v.kind == "atom" and th.is_defined(v.pred):
            return i
        if tag in ("muL", "unfold") and v.kind == "atom" and th.is_inductive(v.pred):
            return i
    raise ScriptError(f"{tag}: no suitable hypothesis")


def interpret(th: Theory, goal: Sequent, step: Step):
    """Rule or Macro for a script step against the given goal."""
    tag = step.tag
    args = list(step.args)

    def done(x):
        if args:
            raise ScriptError(f"{tag}: unexpected extra argument")
        return x

    if tag in RIGHT_PLAIN:
        return done(Rule(tag))
    if tag == "defR":
        k = args.pop(0)[1] if args and args[0][0] == "int" else 0
        return done(Rule(tag, clause=k))
    if tag == "allR":
        if not args or args[0][0] != "name":
            raise ScriptError("allR needs a variable name")
        return done(Rule(tag, var=args.pop(0)[1]))
    if tag == "exR":
        v = view(goal.concl)
        if v.kind != "exists" or not args:
            raise ScriptError("exR needs an existential goal and a witness")
        return done(Rule(tag, term=_term_arg(th, goal, args.pop(0), v.qty)))
    if tag == "nablaR":
        if not args:
            raise ScriptError("nablaR needs a nominal constant")
        return done(Rule(tag, nom=_nom_arg(args.pop(0))))
    if tag == "Ax":
        perm = IDENTITY
        if args and args[0][0] == "perm":
            try:
                perm = Perm.of({Nom(a.index, a.ty): Nom(b.index, b.ty) for a, b in args.pop(0)[1]})
            except TermError as e:
                raise ScriptError(str(e)) from None
        elif len(goal.hyps) == 1:
            perm = _find_perm(goal.hyps[0], goal.concl) or IDENTITY
        return done(Rule(tag, perm=perm))
    if tag == "mc":
        if not args or args[0][0] != "cuts":
            raise ScriptError("mc needs a list of cut formulas")
        cuts = tuple(_term_arg(th, goal, ("term", c), PROP) for c in args.pop(0)[1])
        parts = []
        while args and args[0][0] == "int":
            parts.append(args.pop(0)[1])
        if not parts:
            parts = [0] * len(goal.hyps)
        return done(Rule(tag, cuts=cuts, parts=tuple(parts)))
    if tag == "init":
        if len(goal.hyps) != 1:
            raise ScriptError("init needs exactly one hypothesis")
        pi = _find_perm(goal.hyps[0], goal.concl)
        if pi is None:
            raise ScriptError("init: consequent is not a renaming of the hypothesis")
        return done(Macro("init", perm=pi))
    if tag in ("unfold", "unfold_left"):
        pos = _hyp_arg(th, goal, args, "unfold")
        return done(Macro("unfold", pos=pos))
    if tag in LEFT_KIND or tag in ("cL", "wL", "defL", "muL"):
        pos = _hyp_arg(th, goal, args, tag)
        principal = view(goal.hyps[pos])
        if tag == "allL":
            if not args or principal.kind != "forall":
                raise ScriptError("allL needs a universal hypothesis and a witness")
            return done(Rule(tag, pos=pos, term=_term_arg(th, goal, args.pop(0), principal.qty)))
        if tag == "exL":
            if not args or args[0][0] != "name":
                raise ScriptError("exL needs a variable name")
            return done(Rule(tag, pos=pos, var=args.pop(0)[1]))
        if tag == "nablaL":
            if not args:
                raise ScriptError("nablaL needs a nominal constant")
            return done(Rule(tag, pos=pos, nom=_nom_arg(args.pop(0))))
        if tag == "muL":
            if not args:
                raise ScriptError("muL needs an invariant")
            p = principal.pred
            ty = th.inds[p].pred_const.ty if th.is_inductive(p) else None
            return done(Rule(tag, pos=pos, inv=_term_arg(th, Sequent((), (), goal.concl), args.pop(0), ty)))
        return done(Rule(tag, pos=pos))
    raise ScriptError(f"unknown rule {tag}")


def _find_perm(a, c) -> Perm | None:
    return find_perm(a, c)


# ---------------------------------------------------------------- proof states


@dataclass
class _Node:
    goal: Sequent
    action: object = None
    children: list = field(default_factory=list)


def _premises(th: Theory, node: _Node, action) -> list[Sequent]:
    if isinstance(action, Rule):
        return backward_apply(node.goal, action, th)
    if action.name == "init":
        return []
    g = node.goal
    atom = g.hyps[action.pos]
    v = view(atom)
    if not th.is_inductive(v.pred):
        raise RuleError("unfold needs an inductive atom")
    ind = th.inds[v.pred]
    rest = g.without(action.pos)
    return [Sequent.make(g.ctx, rest + [ind.body_for(ind.pred_const, list(v.args))], g.concl)]


def _assemble(th: Theory, node: _Node) -> Derivation:
    a = node.action
    if isinstance(a, Rule):
        return Derivation(node.goal, a, tuple(_assemble(th, c) for c in node.children))
    if a.name == "init":
        return derive_init(th, node.goal.ctx, node.goal.hyps[0], a.perm)
    return derive_unfold_left(th, _assemble(th, node.children[0]), node.goal.hyps[a.pos])


@dataclass
class ProofState:
    theory: Theory
    name: str
    statement: Sequent
    steps: tuple = ()
    root: _Node | None = None
    open: list = field(default_factory=list)
    banner: str | None = None

    @staticmethod
    def start(th: Theory, name: str, statement: Sequent, banner: str | None = None) -> "ProofState":
        root = _Node(statement)
        return ProofState(th, name, statement, (), root, [root], banner)

    @property
    def goals(self) -> list[Sequent]:
        return [n.goal for n in self.open]

    def apply(self, step: Step) -> "ProofState":
        """New state with one more step; the receiver is left untouched."""
        st = ProofState.start(self.theory, self.name, self.statement, self.banner)
        for i, s in enumerate(self.steps + (step,)):
            st._step(s, i + 1)
        return st

    def _step(self, step: Step, number: int) -> None:
        if not self.open:
            raise ScriptError("no goals left", number)
        g = step.goal or 0
        if not 0 <= g < len(self.open):
            raise ScriptError(f"no goal {g}", number)
        node = self.open[g]
        try:
            action = interpret(self.theory, node.goal, step)
            prem = _premises(self.theory, node, action)
        except ScriptError as e:
            raise ScriptError(str(e), number) from None
        except (RuleError, TheoryError, TermError, PatternError) as e:
            raise ScriptError(f"{step.tag}: {e}", number) from None
        node.action = action
        node.children = [_Node(p) for p in prem]
        self.open[g:g + 1] = node.children
        self.steps = self.steps + (step,)

    def undo(self) -> "ProofState":
        st = ProofState.start(self.theory, self.name, self.statement, self.banner)
        for i, s in enumerate(self.steps[:-1]):
            st._step(s, i + 1)
        return st

    def qed(self) -> Derivation:
        if self.open:
            raise ScriptError(f"{len(self.open)} goal(s) left")
        try:
            d = _assemble(self.theory, self.root)
        except (RuleError, TheoryError) as e:
            raise ScriptError(str(e)) from None
        res = check_derivation(d, self.theory)
        if not res:
            raise ScriptError(f"kernel rejected the derivation at {list(res.path)}: {res.reason}")
        return d

    def render_goals(self) -> str:
        if not self.open:
            return "no goals"
        return "\n".join(f"[{i}] {g.render()}" for i, g in enumerate(self.goals))


def run_script(th: Theory, statement: Sequent, steps, name: str = "") -> Derivation:
    st = ProofState.start(th, name, statement)
    for i, s in enumerate(steps):
        st._step(s, i + 1)
    if st.open:
        raise ScriptError(f"{len(st.open)} goal(s) left after the last step", len(steps))
    return st.qed()


# ---------------------------------------------------------------- REPL


def parse_step(text: str) -> Step:
    text = text.strip()
    if not text.endswith("."):
        text += "."
    try:
        tree = _parser().parse(text, start="step")
        return _Items().transform(tree)
    except Exception as e:
        raise ScriptError(f"cannot parse step: {e}") from None


@dataclass
class ReplResult:
    state: ProofState
    message: str
    derivation: Derivation | None = None
    finished: bool = False


def repl_step(state: ProofState, command: str) -> ReplResult:
    cmd = command.strip()
    word, _, rest = cmd.partition(" ")
    try:
        if word == "goals":
            return ReplResult(state, state.render_goals())
        if word == "undo":
            if not state.steps:
                return ReplResult(state, "error: nothing to undo")
            st = state.undo()
            return ReplResult(st, st.render_goals())
        if word == "abandon":
            return ReplResult(state, "abandoned", finished=True)
        if word == "qed":
            d = state.qed()
            msg = "qed"
            if state.banner:
                msg = f"{state.banner}\n{msg}"
            return ReplResult(state, msg, d, True)
        if word == "apply":
            st = state.apply(parse_step(rest))
        elif word in ("init", "unfold_left", "unfold"):
            st = state.apply(parse_step(cmd))
        else:
            return ReplResult(state, f"error: unknown command {word}")
    except ScriptError as e:
        return ReplResult(state, f"error: {e}")
    return ReplResult(st, st.render_goals())


# ---------------------------------------------------------------- export


def derivation_steps(d: Derivation) -> list[Step]:
    """Preorder steps that replay to d, with depth recorded for layout."""
    out = []

    def go(d: Derivation, depth: int) -> None:
        out.append(rule_step(d.rule, depth))
        # indent only where the tree branches
        step = 1 if len(d.premises) > 1 else 0
        for p in d.premises:
            go(p, depth + step)

    go(d, 0)
    return out


def rule_step(r: Rule, depth: int = 0) -> Step:
    args: list = []
    if r.pos is not None:
        args.append(("int", r.pos))
    if r.tag == "defR":
        args.append(("int", r.clause or 0))
    if r.var is not None:
        args.append(("name", r.var))
    if r.term is not None:
        args.append(("term", _RawTerm(r.term)))
    if r.nom is not None:
        args.append(("nom", SNom(r.nom.index, r.nom.ty)))
    if r.tag == "Ax":
        pairs = tuple((SNom(a.index, a.ty), SNom(b.index, b.ty)) for a, b in (r.perm or IDENTITY).pairs)
        if pairs:
            args.append(("perm", pairs))
    if r.inv is not None:
        args.append(("term", _RawTerm(r.inv)))
    if r.tag == "mc":
        args.append(("cuts", tuple(_RawTerm(c) for c in r.cuts or ())))
        args.extend(("int", p) for p in r.parts or ())
    s = Step(r.tag, tuple(args))
    s.indent = depth
    return s


@dataclass(frozen=True)
class _RawTerm:
    """An elaborated term standing in for surface syntax when printing."""

    term: object


def _show_arg(kind, v) -> str:
    if kind == "term":
        return f"({show(v.term)})"
    if kind == "cuts":
        return "[" + "; ".join(show(c.term) for c in v) + "]"
    if kind == "perm":
        return "{" + ", ".join(f"{show_nom(a)} -> {show_nom(b)}" for a, b in v) + "}"
    if kind == "nom":
        return show_nom(v)
    return str(v)


def show_sequent(s: Sequent) -> str:
    ctx = ", ".join(f"{x}:{t}" for x, t in s.ctx)
    hyps = ", ".join(show(h) for h in s.hyps)
    return f"[{ctx}; {hyps}{' ' if hyps else ''}|- {show(s.concl)}]"


def export_derivation(d: Derivation, theory_path: str, ground: dict | None = None,
                      comment: str | None = None) -> str:
    lines = []
    if comment:
        lines += [f"% {c}" if c else "%" for c in comment.splitlines()]
    lines.append(f'theory "{theory_path}".')
    lines.append(f"sequent {show_sequent(d.concl)}.")
    if ground:
        lines.append("ground " + "; ".join(f"{x} := {show(t)}" for x, t in ground.items()) + ".")
    lines.append("proof")
    for s in derivation_steps(d):
        body = " ".join([s.tag] + [_show_arg(k, v) for k, v in s.args]) + "."
        lines.append("  " * (s.indent + 1) + body)
    lines.append("qed.")
    return "\n".join(lines) + "\n"


@dataclass
class LoadedExport:
    derivation: Derivation
    theory: Theory
    theory_path: Path
    ground: dict
    comment: str | None
    banner: str | None


def load_theory_file(path, unsafe_ack: bool = False):
    text = Path(path).read_text(encoding="utf-8")
    return elaborate_and_gate(parse_theory(text), unsafe_ack)


def load_export(path, unsafe_ack: bool = False, text: str | None = None) -> LoadedExport:
    """Parse a .ldp file, load its theory, replay and check the derivation."""
    path = Path(path)
    if text is None:
        text = path.read_text(encoding="utf-8")
    tf = parse_theory(text)
    exports = tf.of(ExportDecl)
    if len(exports) != 1:
        raise ScriptError("an export file holds exactly one derivation")
    ex = exports[0]
    tpath = (path.parent / ex.theory).resolve()
    th, _, rep = load_theory_file(tpath, unsafe_ack)
    goal = elab_goal(ex.goal, th.sig)
    d = run_script(th, goal, ex.steps)
    ground = {}
    cm = goal.ctx_map
    for x, e in ex.ground:
        if x not in cm:
            raise ScriptError(f"ground binding for unknown eigenvariable {x}")
        ground[x] = elab_term(e, Scope(th.sig, {}), cm[x])
    cs = [c.text[1:] if c.text.startswith(" ") else c.text for c in tf.of(Comment)]
    return LoadedExport(d, th, tpath, ground, "\n".join(cs) if cs else None, rep.banner)
