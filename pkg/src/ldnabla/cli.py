"""Command-line entry points: ldn check | repl | normalize | fmt."""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .elab import ElabError, GateRejected, Scope, elab_goal, elab_term, elaborate_and_gate
from .ground import (
    STRATEGIES,
    GroundingError,
    ReductionError,
    ground_derivation,
    normalize,
    slice_check,
)
from .script import (
    ProofState,
    ScriptError,
    export_derivation,
    load_export,
    repl_step,
    run_script,
)
from .syntax import SyntaxErr, parse_goal, parse_ground, parse_theory, print_theory

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_EXHAUSTED = 0, 1, 2, 3


def _env(name: str, default):
    raw = os.environ.get("LDN_" + name)
    if raw is None:
        return default
    if isinstance(default, bool):
        return raw.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        try:
            return int(raw)
        except ValueError:
            raise SystemExit(f"ldn: LDN_{name} must be an integer") from None
    return raw


def _positive(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected an integer") from None
    if n < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return n


def _natural(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected an integer") from None
    if n < 0:
        raise argparse.ArgumentTypeError("must not be negative")
    return n


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--unsafe", action="store_true", default=_env("UNSAFE", False),
                        help="load theories marked #unsafe even though stratification fails")

    engine = argparse.ArgumentParser(add_help=False)
    engine.add_argument("--fuel", type=_positive, default=_env("FUEL", 1000))
    engine.add_argument("--depth", type=_natural, default=_env("DEPTH", 3), help="explore depth")
    engine.add_argument("--samples", type=_natural, default=_env("SAMPLES", 8), help="members checked per premise family")
    engine.add_argument("--term-size", type=_natural, default=_env("TERM_SIZE", 3), help="largest sampled index term")
    engine.add_argument("--strategy", choices=sorted(STRATEGIES), default=_env("STRATEGY", "default"))
    engine.add_argument("--trace", metavar="PATH", default=_env("TRACE", None),
                        help="write the reduction trace as JSON lines ('-' for stdout)")

    p = argparse.ArgumentParser(prog="ldn", description="Proof checker and cut-reduction engine.")
    sub = p.add_subparsers(dest="cmd", required=True)

    c = sub.add_parser("check", parents=[common], help="check a theory file and replay its proofs")
    c.add_argument("paths", nargs="+", type=Path)
    c.add_argument("-v", "--verbose", action="store_true", help="print stratification verdicts")

    r = sub.add_parser("repl", parents=[common], help="prove a theorem interactively")
    r.add_argument("path", type=Path)
    r.add_argument("--theorem", help="name of a theorem in the file (default: the first)")
    r.add_argument("--goal", help="statement to prove instead of a named theorem")
    r.add_argument("--out", type=Path, help="where to write the .ldp file on qed")

    n = sub.add_parser("normalize", parents=[common, engine], help="ground and normalize a .ldp derivation")
    n.add_argument("path", type=Path)
    n.add_argument("--ground", metavar="BINDINGS", help="grounding such as 'x := z; y := s z' (overrides the file)")

    f = sub.add_parser("fmt", help="print a file in canonical layout")
    f.add_argument("path", type=Path)
    f.add_argument("--check", action="store_true", help="exit 1 if the file is not canonical")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return {"check": cmd_check, "repl": cmd_repl, "normalize": cmd_normalize, "fmt": cmd_fmt}[args.cmd](args)
    except (SyntaxErr, ElabError) as e:
        print(f"ldn: {e}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as e:
        print(f"ldn: {e}", file=sys.stderr)
        return EXIT_FAIL


def _out(line: str = "") -> None:
    print(line, flush=True)


def _err(line: str) -> None:
    print(line, file=sys.stderr, flush=True)


# ---------------------------------------------------------------- check


def cmd_check(args) -> int:
    status = EXIT_OK
    for path in args.paths:
        status = max(status, _check_one(path, args))
    return status


def _check_one(path: Path, args) -> int:
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".ldp":
        try:
            ex = load_export(path, args.unsafe, text)
        except GateRejected as e:
            _err(f"{path}: {e}")
            return EXIT_FAIL
        except ScriptError as e:
            _out(f"{path.stem}\tfail\t0\t{e}")
            return EXIT_FAIL
        if ex.banner:
            _err(ex.banner)
        _out(f"{path.stem}\tok\t{ex.derivation.size()}")
        return EXIT_OK
    tf = parse_theory(text)
    try:
        th, theorems, rep = elaborate_and_gate(tf, args.unsafe)
    except GateRejected as e:
        for line in e.report.lines():
            _err(f"strat\t{line}")
        _err(f"{path}: {e}")
        return EXIT_FAIL
    if rep.banner:
        _err(rep.banner)
    if args.verbose:
        for line in rep.lines():
            _err(f"strat\t{line}")
    status = EXIT_OK
    for name, goal, steps, _ in theorems:
        try:
            d = run_script(th, goal, steps, name)
        except ScriptError as e:
            _out(f"{name}\tfail\t0\t{e}")
            status = EXIT_FAIL
            continue
        _out(f"{name}\tok\t{d.size()}")
    return status


# ---------------------------------------------------------------- repl


def cmd_repl(args) -> int:
    path = args.path
    tf = parse_theory(path.read_text(encoding="utf-8"))
    try:
        th, theorems, rep = elaborate_and_gate(tf, args.unsafe)
    except GateRejected as e:
        _err(f"{path}: {e}")
        return EXIT_FAIL
    if rep.banner:
        _err(rep.banner)
    if args.goal:
        name, statement = args.theorem or "goal", elab_goal(parse_goal(args.goal), th.sig)
    else:
        named = [(n, g) for n, g, _, _ in theorems if args.theorem in (None, n)]
        if not named:
            _err(f"ldn: no theorem {args.theorem!r} in {path}")
            return EXIT_FAIL
        name, statement = named[0]
    state = ProofState.start(th, name, statement, rep.banner)
    interactive = sys.stdin.isatty()
    _out(state.render_goals())
    while True:
        if interactive:
            print("ldn> ", end="", flush=True)
        line = sys.stdin.readline()
        if not line:
            _err("ldn: input ended with the proof unfinished; state discarded")
            return EXIT_FAIL
        line = line.strip()
        if not line or line.startswith("%"):
            continue
        res = repl_step(state, line)
        _out(res.message)
        state = res.state
        if res.finished:
            if res.derivation is None:
                return EXIT_FAIL
            out = args.out or Path(f"{name}.ldp")
            theory_ref = os.path.relpath(path.resolve(), out.resolve().parent)
            out.write_text(export_derivation(res.derivation, theory_ref), encoding="utf-8")
            _out(f"wrote {out}")
            return EXIT_OK


# ---------------------------------------------------------------- normalize


def _parse_ground(text: str, th, ctx) -> dict:
    cm = dict(ctx)
    out = {}
    for x, e in parse_ground(text):
        if x not in cm:
            raise GroundingError(f"ground binding for unknown eigenvariable {x}")
        out[x] = elab_term(e, Scope(th.sig, {}), cm[x])
    return out


def cmd_normalize(args) -> int:
    try:
        ex = load_export(args.path, args.unsafe)
    except GateRejected as e:
        _err(f"{args.path}: {e}")
        return EXIT_FAIL
    except ScriptError as e:
        _err(f"{args.path}: {e}")
        return EXIT_FAIL
    if ex.banner:
        _err(ex.banner)
    th, d = ex.theory, ex.derivation
    try:
        delta = _parse_ground(args.ground, th, d.concl.ctx) if args.ground else ex.ground
        g = ground_derivation(d, delta, th)
    except GroundingError as e:
        _err(f"ldn: {e}")
        return EXIT_FAIL
    chk = slice_check(g, th, args.depth, args.samples, args.term_size)
    if not chk:
        _err(f"ldn: ground schema fails at {list(chk.path)}: {chk.reason}")
        return EXIT_FAIL
    try:
        nf = normalize(g, th, args.fuel, args.depth, args.samples, args.term_size, STRATEGIES[args.strategy])
    except (ReductionError, GroundingError) as e:
        _err(f"ldn: internal reduction failure: {e}")
        return EXIT_FAIL
    trace = nf.trace.to_jsonl()
    if args.trace == "-":
        sys.stdout.write(trace)
    elif args.trace:
        Path(args.trace).write_text(trace, encoding="utf-8")
    root = g.concl.render()
    summary = f"{nf.status}\t{nf.fuel_used}\t{root}"
    if nf.reason:
        summary += f"\t{nf.reason}"
    _out(summary)
    return EXIT_OK if nf.cutfree else EXIT_EXHAUSTED


# ---------------------------------------------------------------- fmt


def cmd_fmt(args) -> int:
    text = args.path.read_text(encoding="utf-8")
    canon = print_theory(parse_theory(text))
    if args.check:
        if canon != text:
            _err(f"{args.path}: not in canonical layout")
            return EXIT_FAIL
        return EXIT_OK
    sys.stdout.write(canon)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
