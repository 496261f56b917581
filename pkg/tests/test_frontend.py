import random
from pathlib import Path

import pytest
from hypothesis import given, strategies as st

import oracles as O
from conftest import CORPUS, EXPORTS, theory
from ldnabla.calculus import check_derivation, derive_init
from ldnabla.elab import ElabError, GateRejected, elab_goal, elaborate, elaborate_and_gate
from ldnabla.script import (
    ProofState,
    ScriptError,
    export_derivation,
    load_export,
    load_theory_file,
    parse_step,
    repl_step,
    run_script,
)
from ldnabla.syntax import DefineDecl, InductiveDecl, SyntaxErr, parse_goal, parse_theory, print_theory, show_step
from ldnabla.formulas import mk_and, mk_quant_var
from ldnabla.terms import PROP, App, Arrow, Base, Const, Var, show


def text(name: str) -> str:
    return (CORPUS / name).read_text(encoding="utf-8")


# ---------------------------------------------------------------- parsing


def test_parse_append_definitions():
    tf = parse_theory(text("append.ldn"))
    defs = tf.of(DefineDecl)
    assert [d.predicate for d in defs] == ["list", "append"]
    assert [len(d.clauses) for d in defs] == [2, 2]


def test_parse_even():
    tf = parse_theory(text("even.ldn"))
    assert [d.predicate for d in tf.of(DefineDecl)] == ["ev"]
    assert [d.predicate for d in tf.of(InductiveDecl)] == ["ev'"]


def test_non_pattern_head_is_rejected():
    src = "kind tm. type p (tm -> tm) -> o.\ndefine p by\n  p (\\x:tm. X X) := true.\n"
    with pytest.raises((ElabError, SyntaxErr)):
        elaborate(parse_theory(src))


def test_syntax_error_has_line():
    with pytest.raises(SyntaxErr) as e:
        parse_theory("kind tm.\ntype z tm\ntype s tm -> tm.\n")
    assert "line" in str(e.value)


def test_ascii_and_unicode_connectives_agree():
    th = theory("prop.ldn")
    a = elab_goal(parse_goal("[; a /\\ b |- a => c \\/ b]"), th.sig)
    b = elab_goal(parse_goal("[; a ∧ b ⊢ a ⊃ c ∨ b]"), th.sig)
    assert a == b


# ---------------------------------------------------------------- gate


def test_gate_logeq_accepted():
    _, _, rep = elaborate_and_gate(parse_theory(text("logeq.ldn")))
    assert rep.accepted and rep.banner is None


def test_gate_odd_rejected_without_ack():
    with pytest.raises(GateRejected) as e:
        elaborate_and_gate(parse_theory(text("odd_unsound.ldn")))
    assert any(v.predicate == "odd" and v.verdict == "reject" for v in e.value.report.verdicts)


def test_gate_pbot_unsafe_banner():
    _, _, rep = elaborate_and_gate(parse_theory(text("pbot.ldn")), unsafe_ack=True)
    assert rep.loaded and not rep.accepted and rep.banner


@pytest.mark.parametrize("name", ["append.ldn", "even.ldn", "logeq.ldn", "prop.ldn", "redexes.ldn",
                                  "list_fix.ldn", "odd_unsound.ldn", "pbot.ldn"])
def test_gate_soundness(name):
    # without the acknowledgement a theory loads only if every verdict accepts
    tf = parse_theory(text(name))
    try:
        _, _, rep = elaborate_and_gate(tf, unsafe_ack=False)
    except GateRejected as e:
        assert not e.report.accepted
        return
    assert rep.accepted


# ---------------------------------------------------------------- scripts


def test_append_nil_fails_closes_with_empty_case_analysis():
    th, thms, _ = load_theory_file(CORPUS / "append.ldn")
    (_, goal, steps, _), = [t for t in thms if t[0] == "append_nil_fails"]
    d = run_script(th, goal, steps)
    leaf = [x for _, x in d.nodes() if x.rule.tag == "defL"]
    assert leaf and all(x.premises == () for x in leaf)


def test_even_sub_uses_mu_with_ev_invariant():
    th, thms, _ = load_theory_file(CORPUS / "even.ldn")
    (_, goal, steps, _), = thms
    d = run_script(th, goal, steps)
    (mu,) = [x for _, x in d.nodes() if x.rule.tag == "muL"]
    assert show(mu.rule.inv) == "\\x:tm. ev x"


def test_script_error_reports_step():
    th = theory("prop.ldn")
    goal = elab_goal(parse_goal("[; a |- a]"), th.sig)
    with pytest.raises(ScriptError) as e:
        run_script(th, goal, [parse_step("andR")])
    assert e.value.step == 1


# ---------------------------------------------------------------- repl


def fresh_state(name="prop.ldn", goal="[; a |- b => a]", unsafe=False):
    th, _, rep = load_theory_file(CORPUS / name, unsafe)
    return ProofState.start(th, "t", elab_goal(parse_goal(goal), th.sig), rep.banner)


def test_repl_fresh_goal():
    st = fresh_state()
    assert len(st.goals) == 1 and st.goals[0] == st.statement


def test_repl_apply_then_undo():
    st = fresh_state()
    r = repl_step(st, "apply impR")
    assert "b" in r.message and r.state.steps
    back = repl_step(r.state, "undo").state
    assert back.goals == st.goals and back.steps == ()


def test_repl_bad_command_keeps_state():
    st = fresh_state("redexes.ldn", "[; |- exists x:tm. q x]")
    r = repl_step(st, "apply exR (a)")
    assert r.message.startswith("error") and r.state is st


def test_repl_qed_counter_ex1_unsafe():
    th, thms, rep = load_theory_file(CORPUS / "odd_unsound.ldn", True)
    (_, goal, steps, _), = [t for t in thms if t[0] == "counter_ex1"]
    st = ProofState.start(th, "counter_ex1", goal, rep.banner)
    for s in steps:
        r = repl_step(st, "apply " + show_step(s))
        assert not r.message.startswith("error"), r.message
        st = r.state
    r = repl_step(st, "qed")
    assert r.finished and r.derivation is not None
    assert rep.banner in r.message


# ---------------------------------------------------------------- export


def test_export_ax_single_line():
    th = theory("prop.ldn")
    d = derive_init(th, (), elab_goal(parse_goal("[; |- a]"), th.sig).concl)
    out = export_derivation(d, "prop.ldn")
    body = out.split("proof\n")[1].split("qed.")[0]
    assert body == "  Ax.\n"


def test_export_init_conjunction_nested():
    th = theory("prop.ldn")
    d = derive_init(th, (), elab_goal(parse_goal("[; |- a /\\ b]"), th.sig).concl)
    out = export_derivation(d, "prop.ldn")
    assert "  andR.\n    andL1 0.\n    Ax.\n    andL2 0.\n    Ax.\n" in out


@pytest.mark.parametrize("name", sorted(EXPORTS))
def test_export_round_trip(name, tmp_path):
    ex = load_export(CORPUS / name, EXPORTS[name])
    rel = Path("..") / ex.theory_path.name
    sub = tmp_path / "x"
    sub.mkdir()
    for f in CORPUS.iterdir():
        (tmp_path / f.name).write_text(f.read_text(encoding="utf-8"), encoding="utf-8")
    out = export_derivation(ex.derivation, str(rel), ex.ground or None, ex.comment)
    p = sub / name
    p.write_text(out, encoding="utf-8")
    again = load_export(p, EXPORTS[name])
    assert again.derivation == ex.derivation
    assert export_derivation(again.derivation, str(rel), again.ground or None, again.comment) == out


@pytest.mark.parametrize("name", ["append.ldn", "even.ldn", "logeq.ldn", "prop.ldn", "redexes.ldn"])
def test_scripts_imply_kernel_ok(name):
    th, thms, _ = load_theory_file(CORPUS / name)
    for n, goal, steps, _ in thms:
        assert check_derivation(run_script(th, goal, steps, n), th)


# ---------------------------------------------------------------- printing


@pytest.mark.parametrize("path", sorted(CORPUS.glob("*.ld[np]")), ids=lambda p: p.name)
def test_print_parse_identity(path):
    src = path.read_text(encoding="utf-8")
    canon = print_theory(parse_theory(src))
    assert canon == src
    assert print_theory(parse_theory(canon)) == canon


@given(st.integers(0, 10**6))
def test_formula_print_parse_round_trip(seed):
    th = theory("redexes.ldn")
    rng = random.Random(seed)
    f = O.formula_of(O.random_prop(rng, 4))
    if rng.random() < 0.5:
        tm = Base("tm")
        body = O.formula_of(O.random_prop(rng, 2))
        body = mk_and(body, App(Const("q", Arrow(tm, PROP)), Var("x", tm)))
        f = mk_quant_var(rng.choice(["forall", "exists", "nabla"]), "x", tm, body)
    g = elab_goal(parse_goal(f"[; |- {show(f)}]"), th.sig)
    assert g.concl == f
