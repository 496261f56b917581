from __future__ import annotations

import sys
from functools import lru_cache
from pathlib import Path

from hypothesis import settings

from ldnabla.script import load_export, load_theory_file, run_script

ROOT = Path(__file__).resolve().parents[1]
CORPUS = ROOT / "corpus"
DATA = Path(__file__).resolve().parent / "data"

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@lru_cache(maxsize=None)
def theory(name: str, unsafe: bool = False):
    th, _, _ = load_theory_file(CORPUS / name, unsafe)
    return th


@lru_cache(maxsize=None)
def theorems(name: str, unsafe: bool = False) -> dict:
    """name -> checked derivation for every theorem of a corpus file."""
    th, thms, _ = load_theory_file(CORPUS / name, unsafe)
    return {n: run_script(th, goal, steps, n) for n, goal, steps, _ in thms}


@lru_cache(maxsize=None)
def export(name: str, unsafe: bool = False):
    return load_export(CORPUS / name, unsafe)


SAFE_THEORIES = ["append.ldn", "even.ldn", "logeq.ldn", "prop.ldn", "redexes.ldn"]
UNSAFE_THEORIES = ["odd_unsound.ldn", "pbot.ldn"]
EXPORTS = {
    "append_cons2.ldp": False,
    "cut_demo.ldp": False,
    "even_sub.ldp": False,
    "odd_false.ldp": True,
    "pbot_false.ldp": True,
}


def corpus_derivations():
    """(label, theory, derivation) for every derivation in the corpus."""
    out = []
    for name in SAFE_THEORIES + UNSAFE_THEORIES:
        unsafe = name in UNSAFE_THEORIES
        th = theory(name, unsafe)
        for n, d in theorems(name, unsafe).items():
            out.append((f"{name}:{n}", th, d))
    for name, unsafe in EXPORTS.items():
        ex = export(name, unsafe)
        out.append((name, ex.theory, ex.derivation))
    return out


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS, key=lambda l: int(l.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
