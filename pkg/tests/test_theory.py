import itertools
import random

import pytest
from hypothesis import given, strategies as st

import oracles as O
from conftest import CORPUS, theory
from ldnabla.elab import elab_goal, elaborate, gate
from ldnabla.ordinal import OMEGA, ZERO, Ordinal, omax
from ldnabla.syntax import parse_goal, parse_theory
from ldnabla.terms import apply_subst, enumerate_ground, show
from ldnabla.theory import (
    check_strict_strat,
    check_weak_strat,
    clausal_to_fixedpoint,
    defn_premises,
    eval_measure,
    level_of_ground,
    level_of_open,
)


def load(text: str):
    th, _ = elaborate(parse_theory(text))
    return th


def formula(th, text: str):
    s = elab_goal(parse_goal(text), th.sig)
    return s.concl, s.ctx_map


# ---------------------------------------------------------------- measures


def test_eval_measure_examples():
    ev = theory("even.ldn")
    lq = theory("logeq.ldn")
    assert eval_measure(ev, "size", formula(ev, "[; |- ev (s (s z))]")[0].arg) == 2
    t = lambda s: formula(lq, f"[; |- logeq {s} z z]")[0].fn.fn.arg
    assert eval_measure(lq, "size", t("nt")) == 0
    assert eval_measure(lq, "size", t("(arr nt (arr nt nt))")) == 1


def _ty_size(t) -> int:
    # size nt = 0, size (arr A B) = max(size A + 1, size B), by hand
    if t == ("c", "nt"):
        return 0
    a, b = t[1][2], t[2]
    return max(_ty_size(a) + 1, _ty_size(b))


def test_eval_measure_matches_hand_recursion():
    lq = theory("logeq.ldn")
    sig = {"nt": "ty", "arr": O.arr("ty", "ty", "ty")}
    for t in O.ground_upto(sig, "ty", 7):
        lt = O.to_lib_typed(t, "ty", sig, {})
        assert eval_measure(lq, "size", lt) == _ty_size(t), show(lt)


def test_eval_measure_nominal_is_zero():
    from ldnabla.terms import Base, Nom

    ev = theory("even.ldn")
    assert eval_measure(ev, "size", Nom(1, Base("tm"))) == 0


# ---------------------------------------------------------------- levels


def test_level_of_ground_examples():
    ev = theory("even.ldn")
    assert level_of_ground(ev, formula(ev, "[; |- false]")[0]) == ZERO
    assert level_of_ground(ev, formula(ev, "[; |- ev (s z)]")[0]) == Ordinal.nat(1)
    assert level_of_ground(ev, formula(ev, "[; |- ev z => false]")[0]) == Ordinal.nat(1)


def test_level_of_open_examples():
    lq = theory("logeq.ldn")
    arrow_clause = lq.defs["logeq"].clauses[-1]
    assert "max(size A + 1, size B)" in level_of_open(lq, arrow_clause.body).render()
    lf = theory_unchecked("list_fix.ldn")
    body = lf.defs["list"].clauses[0].body
    assert level_of_open(lf, body).value() == OMEGA
    ev = theory("even.ldn")
    assert level_of_open(ev, formula(ev, "[; |- true /\\ true]")[0]).value() == ZERO


def theory_unchecked(name: str):
    return load((CORPUS / name).read_text())


@pytest.mark.parametrize("text", [
    "[; |- ev (s (s z)) => false]",
    "[; |- ev z /\\ (ev (s z) \\/ ev' (s z))]",
    "[; |- ev' z => ev (s (s (s z)))]",
    "[; |- forall x:tm. ev x]",
])
def test_level_open_agrees_on_ground(text):
    ev = theory("even.ldn")
    f, _ = formula(ev, text)
    e = level_of_open(ev, f)
    if e.is_const():
        assert e.value() == level_of_ground(ev, f)


# ---------------------------------------------------------------- stratification


def verdicts(th):
    return [v.verdict for v in check_weak_strat(th) + check_strict_strat(th)]


def test_weak_strat_examples():
    assert set(verdicts(theory("even.ldn"))) == {"accept"}
    assert set(verdicts(theory("logeq.ldn"))) == {"accept"}
    pb = theory_unchecked("pbot.ldn")
    assert [v.verdict for v in check_weak_strat(pb)] == ["reject"]


def test_strict_strat_examples():
    fixed = load(
        "kind tm. kind lst. type z tm. type nil lst. type cons tm -> lst -> lst.\n"
        "type list lst -> o.\n"
        "inductive list L := eq L nil \\/ (exists X:tm, K:lst. eq L (cons X K) /\\ list K).\n"
    )
    assert [v.verdict for v in check_strict_strat(fixed)] == ["accept"]
    odd = theory_unchecked("odd_unsound.ldn")
    assert [v.verdict for v in check_strict_strat(odd)] == ["reject"]
    assert check_strict_strat(load("kind tm.\n")) == []


def test_list_fix_rejected_with_omega():
    (v,) = check_weak_strat(theory_unchecked("list_fix.ldn"))
    assert v.verdict == "reject" and "ω" in v.reason


def test_gate_reports_unsafe_only_when_flagged():
    pb = theory_unchecked("pbot.ldn")
    assert not gate(pb, False).loaded
    rep = gate(pb, True)
    assert rep.loaded and rep.banner
    lf = theory_unchecked("list_fix.ldn")
    assert not gate(lf, True).loaded  # no #unsafe pragma


@pytest.mark.parametrize("name", ["even.ldn", "logeq.ldn", "append.ldn"])
def test_weak_strat_numeric_cross_check(name):
    th = theory(name)
    rng = random.Random(5)
    for pred, d in th.defs.items():
        for c in d.clauses:
            pools = [enumerate_ground(th.sig, ty, 4) for _, ty in c.ctx]
            combos = list(itertools.product(*pools))
            for combo in rng.sample(combos, min(40, len(combos))):
                rho = {x: t for (x, _), t in zip(c.ctx, combo)}
                h, b = apply_subst(c.head, rho), apply_subst(c.body, rho)
                assert level_of_ground(th, h) >= level_of_ground(th, b), (pred, show(h))


# ---------------------------------------------------------------- clausal to fixed point


def test_fixedpoint_list():
    ap = theory("append.ldn")
    c = clausal_to_fixedpoint(ap.defs["list"])
    assert show(c.head) == "list x1"
    assert show(c.body) == (
        "eq x1 nil /\\ true \\/ (exists X:tm, L:lst. eq x1 (cons X L) /\\ list L)"
    )


def test_fixedpoint_single_clause():
    th = load("kind tm. type z tm. type p tm -> o.\ndefine p by\n  p z := true.\n")
    c = clausal_to_fixedpoint(th.defs["p"])
    assert show(c.body) == "eq x1 z /\\ true"


def test_fixedpoint_append_two_disjuncts():
    ap = theory("append.ldn")
    c = clausal_to_fixedpoint(ap.defs["append"])
    from ldnabla.formulas import view

    assert view(c.body).kind == "or"
    assert len(c.ctx) == 3


def _disjuncts(f):
    from ldnabla.formulas import view

    v = view(f)
    if v.kind == "or":
        return _disjuncts(v.left) + _disjuncts(v.right)
    return [f]


@given(st.integers(0, 10**6))
def test_fixedpoint_preserves_premises(seed):
    # unfolding the fixed-point body on a ground atom and solving the eq
    # constraints by enumeration gives exactly the clausal premise bodies
    ap = theory("append.ldn")
    rng = random.Random(seed)
    lsts = enumerate_ground(ap.sig, ap.sig["nil"], 5)
    args = [rng.choice(lsts) for _ in range(3)]
    from ldnabla.terms import apply as tapply, Const

    pred = ap.defs["append"]
    a = tapply(Const("append", ap.sig["append"]), *args)
    clausal = sorted(O.from_lib(p.body) for p in defn_premises(ap, a, {}))
    fp = clausal_to_fixedpoint(pred)
    rho = {x: t for (x, _), t in zip(fp.ctx, args)}
    body = apply_subst(fp.body, rho)
    fixed = sorted(_instances_of_body(ap, body))
    assert clausal == fixed


def _instances_of_body(th, body):
    from ldnabla.formulas import open_body, view
    from ldnabla.terms import Var

    out = []
    for disj in _disjuncts(body):
        f, k = disj, 0
        while view(f).kind == "exists":
            v = view(f)
            f = open_body(v, Var(f"_w{k}", v.qty))
            k += 1
        parts = []
        while view(f).kind == "and":
            parts.append(view(f).left)
            f = view(f).right
        parts.append(f)
        sigma = {}
        for p in parts[:-1]:
            lhs, rhs = view(p).args
            sigma = O.fo_match(O.from_lib(rhs), O.from_lib(lhs), sigma)
            if sigma is None:
                break
        else:
            out.append(O.inst(O.from_lib(parts[-1]), sigma))
    return out


# ---------------------------------------------------------------- defn


def test_defn_premises_append_open():
    ap = theory("append.ldn")
    a, ctx = formula(ap, "[V:lst, W:lst; |- append V nil W]")
    ps = defn_premises(ap, a, ctx)
    assert [p.clause for p in ps] == [0, 1]
    nil_case, cons_case = ps
    assert show(nil_case.theta["V"]) == "nil"
    v, w = cons_case.theta["V"], cons_case.theta["W"]
    assert v.fn.arg == w.fn.arg  # same head element X
    assert show(cons_case.body) == f"append {show(v.arg)} nil {show(w.arg)}"


def test_defn_premises_ground():
    ev = theory("even.ldn")
    a, _ = formula(ev, "[; |- ev z]")
    (p,) = defn_premises(ev, a, {})
    assert show(p.body) == "true"
    ap = theory("append.ldn")
    a, _ = formula(ap, "[; |- append nil (cons (s z) nil) nil]")
    assert defn_premises(ap, a, {}) == []


# ---------------------------------------------------------------- ordinals


def _model(v):
    # reference: ordinal as a (c2, c1, c0) vector compared lexicographically
    return tuple(reversed(v + (0,) * (3 - len(v))))


vecs = st.tuples(st.integers(0, 4), st.integers(0, 4), st.integers(0, 4))


@given(vecs, vecs)
def test_ordinal_against_vector_model(a, b):
    x, y = Ordinal(a), Ordinal(b)
    assert (x < y) == (_model(a) < _model(b))
    assert (x == y) == (_model(a) == _model(b))
    assert _model(omax(x, y).coeffs) == max(_model(a), _model(b))
    assert _model(x.nsum(y).coeffs) == tuple(p + q for p, q in zip(_model(a), _model(b)))
    assert _model(x.succ().coeffs) == _model((a[0] + 1, a[1], a[2]))
    assert x < x.succ()
    assert x < x.sup_omega()


def test_ordinal_rendering():
    assert str(OMEGA) == "ω"
    assert str(Ordinal((3, 0, 2))) == "ω^2*2 + 3"
    assert str(ZERO) == "0"
