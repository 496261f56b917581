import random

import pytest
from hypothesis import given, strategies as st

import oracles as O
from conftest import theory
from ldnabla.elab import elab_goal
from ldnabla.syntax import parse_goal
from ldnabla.terms import Var, apply_subst, free_vars, normalize_term, show, support
from ldnabla.unify import OPEN, PatternError, is_pattern, match_against_head, unify_terms, unify_with_head


def term(th, text: str):
    """Consequent of a goal written as [ctx; |- t], with its context."""
    s = elab_goal(parse_goal(text), th.sig)
    return s.concl, s.ctx_map


def test_is_pattern():
    th = theory("append.ldn")
    h, ctx = term(th, "[X:tm, L:lst, K:lst, M:lst; |- append (cons X L) K (cons X M)]")
    assert is_pattern(h, ctx)
    c, _ = term(th, "[; |- append nil nil nil]")
    assert is_pattern(c, {})


def test_not_pattern_self_application():
    from ldnabla.terms import Arrow, Base, App

    tm = Base("tm")
    x = Var("X", Arrow(tm, tm))
    # X applied to something that is not a bound variable or nominal
    assert not is_pattern(App(x, App(x, Var("Y", tm))), {"X": x.ty, "Y": tm})


def test_match_first_order():
    th = theory("even.ldn")
    h, ctx = term(th, "[X:tm; |- ev (s X)]")
    a, _ = term(th, "[; |- ev (s z)]")
    rho = match_against_head(h, ctx, a)
    assert show(rho["X"]) == "z"


def test_match_append_nil():
    th = theory("append.ldn")
    h, ctx = term(th, "[K:lst; |- append nil K K]")
    a, _ = term(th, "[; |- append nil (cons (s z) nil) (cons (s z) nil)]")
    rho = match_against_head(h, ctx, a)
    assert show(rho["K"]) == "cons (s z) nil"


def test_match_clash():
    th = theory("append.ldn")
    h, ctx = term(th, "[X:tm, L:lst, K:lst, M:lst; |- append (cons X L) K (cons X M)]")
    a, _ = term(th, "[; |- append nil nil nil]")
    assert match_against_head(h, ctx, a) is None


def test_unify_append_cons():
    th = theory("append.ldn")
    a, a_ctx = term(th, "[V:lst, W:lst; |- append V nil W]")
    h, h_ctx = term(th, "[X:tm, L:lst, K:lst, M:lst; |- append (cons X L) K (cons X M)]")
    r = unify_with_head(a, a_ctx, h, h_ctx)
    assert r is not None
    assert show(r.rho["K"]) == "nil"
    assert show(r.theta["V"]) == f"cons {show(r.rho['X'])} {show(r.rho['L'])}"
    assert show(r.theta["W"]) == f"cons {show(r.rho['X'])} {show(r.rho['M'])}"
    assert apply_subst(a, r.theta) == apply_subst(h, r.rho)
    assert len(r.range_ctx) == 3


def test_unify_flex_flex():
    th = theory("odd_unsound.ldn", True)
    a, a_ctx = term(th, "[X:tm; |- ev X]")
    h, h_ctx = term(th, "[Y:tm; |- ev Y]")
    r = unify_with_head(a, a_ctx, h, h_ctx)
    assert r is not None and len(r.range_ctx) == 1
    (z, _), = r.range_ctx
    assert r.theta["X"] == r.rho["Y"] == Var(z, a_ctx["X"])


def test_unify_clash():
    th = theory("even.ldn")
    a, a_ctx = term(th, "[; |- ev z]")
    h, h_ctx = term(th, "[X:tm; |- ev (s X)]")
    assert unify_with_head(a, a_ctx, h, h_ctx) is None


def test_unify_rejects_non_pattern_atom():
    from ldnabla.terms import App, Arrow, Base, Const, PROP

    tm = Base("tm")
    p = Const("p", Arrow(tm, PROP))
    f = Var("F", Arrow(tm, tm))
    a = App(p, App(f, Const("z", tm)))
    with pytest.raises(PatternError):
        unify_with_head(a, {"F": f.ty}, App(p, Var("X", tm)), {"X": tm})


# ---------------------------------------------------------------- properties

SIG = {"z": "i", "s": O.arr("i", "i"), "f": O.arr("i", "i", "i")}
VT = {"X": "i", "Y": "i", "F": O.arr("i", "i"), "G": O.arr("i", "i", "i")}


def random_pair(rng: random.Random, max_size: int = 6):
    nb = rng.choice([0, 0, 1, 1, 2])
    env = ("i",) * nb
    ty = "i"
    for e in env:
        ty = ("->", e, ty)
    s = O.random_pattern(rng, rng.randint(1, max_size), env, VT, SIG)
    t = O.random_pattern(rng, rng.randint(1, max_size), env, VT, SIG)
    for _ in env:
        s, t = ("lam", s), ("lam", t)
    return s, t, ty


def mgu_check(s, t, ty) -> str | None:
    """None when the library's unifier agrees with brute force, else a description."""
    ls, lt = O.to_lib_typed(s, ty, SIG, VT), O.to_lib_typed(t, ty, SIG, VT)
    names = sorted(O.free_vars(s) | O.free_vars(t))
    sols = O.solutions([(s, t)], VT, SIG, 3)
    answers = []
    for pair in [(ls, lt), (lt, ls)]:
        theta = unify_terms([pair], {x: OPEN for x in names})
        if theta is None:
            answers.append(set())
            continue
        if normalize_term(apply_subst(pair[0], theta)) != normalize_term(apply_subst(pair[1], theta)):
            return "returned substitution is not a unifier"
        otheta, rng_types = {}, {}
        for x in names:
            v = theta.get(x, Var(x, O.lib_type(VT[x])))
            otheta[x] = O.from_lib(v)
            for y, yt in free_vars(v).items():
                rng_types[y] = O.oracle_type(yt)
        answers.append(O.instances(otheta, rng_types, SIG, 3))
    if answers[0] != sols:
        return f"instances {len(answers[0])} != brute force {len(sols)}"
    if answers[0] != answers[1]:
        return "answer depends on the orientation of the pair"
    return None


@given(st.integers(0, 10**6))
def test_mgu_against_brute_force(seed):
    s, t, ty = random_pair(random.Random(seed))
    assert mgu_check(s, t, ty) is None, (s, t)


@given(st.integers(0, 10**6))
def test_match_unique_on_ground_targets(seed):
    rng = random.Random(seed)
    h = O.random_pattern(rng, rng.randint(1, 6), (), {"X": "i", "Y": "i"}, SIG)
    names = sorted(O.free_vars(h))
    sigma = {x: rng.choice(O.ground_upto(SIG, "i", 3)) for x in names}
    a = O.inst(h, sigma)
    lh, la = O.to_lib_typed(h, "i", SIG, VT), O.to_lib_typed(a, "i", SIG, VT)
    rho = match_against_head(lh, {x: O.lib_type(VT[x]) for x in names}, la)
    assert rho is not None
    brute = [dict(k) for k in O.solutions([(h, a)], VT, SIG, 3)]
    assert len(brute) == 1
    assert {x: O.from_lib(v) for x, v in rho.items()} == brute[0]


def test_unify_with_head_soundness_samples():
    th = theory("append.ldn")
    heads = [c for cs in th.defs.values() for c in cs.clauses]
    atoms = [
        "[V:lst, W:lst; |- append V nil W]",
        "[V:lst; |- append V V V]",
        "[X:tm, V:lst; |- append (cons X V) nil V]",
        "[V:lst; |- list V]",
    ]
    for text in atoms:
        a, a_ctx = term(th, text)
        for c in heads:
            r = unify_with_head(a, a_ctx, c.head, c.ctx_map)
            if r is None:
                continue
            assert apply_subst(a, r.theta) == apply_subst(c.head, r.rho)
            assert all(not support(t) for t in r.theta.values())
