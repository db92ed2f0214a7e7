"""Command-line front end.

Exit codes: 0 sat, 1 unsat, 2 unknown, 3 usage or parse error, 4 backend error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .arranger import ArrangementExplosion, enumerate_arrangements
from .normalizer import BranchExplosion, conjunct_domain_vars, desugar_constants, normalize
from .parser import ParseError, parse
from .pipeline import Config, decide, default_solver
from .reducer import reduction_paths
from .syntax import ValidationError
from .tarski import ProtocolError, SearchBudget, SolverNotFound, emit_exchange
from .witness import dump_witness

EXIT = {"sat": 0, "unsat": 1, "unknown": 2}
EXIT_USAGE = 3
EXIT_BACKEND = 4

CONFIG_KEYS = {
    "solver": str, "timeout": float, "arrangement_cap": int, "branch_cap": int,
    "output_dir": str, "samples": int, "tolerance": float, "workers": int, "seed": int,
}


class UsageError(Exception):
    pass


def read_config_file(path) -> dict:
    """``key = value`` lines; ``#`` comments; keys as in CONFIG_KEYS."""
    out = {}
    for n, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in CONFIG_KEYS:
            raise UsageError(f"{path}:{n}: unknown key {key!r}")
        try:
            out[key] = CONFIG_KEYS[key](value)
        except ValueError:
            raise UsageError(f"{path}:{n}: bad value for {key}") from None
    return out


def _add_common(p):
    p.add_argument("input", nargs="?", help=".rdf file, or - for stdin")
    p.add_argument("-e", "--expr", help="formula text instead of a file")
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--branch-cap", type=int)
    p.add_argument("--arrangement-cap", type=int)


def _add_solver(p):
    p.add_argument("--solver", help="solver command template with a {file} placeholder")
    p.add_argument("--no-solver", action="store_true", help="use the internal search only")
    p.add_argument("--timeout", type=float)
    p.add_argument("--output-dir", "-o")
    p.add_argument("--samples", type=int)
    p.add_argument("--tolerance", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rdfsat", description="Satisfiability for reals with differentiable functions.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("check", help="decide satisfiability")
    _add_common(p)
    _add_solver(p)
    p = sub.add_parser("model", help="decide and print the witness document")
    _add_common(p)
    _add_solver(p)
    p = sub.add_parser("reduce", help="write exchange files per branch and arrangement")
    _add_common(p)
    p.add_argument("--output-dir", "-o", default="rdfsat-out")
    p = sub.add_parser("normalize", help="print the normalized conjuncts")
    _add_common(p)
    p = sub.add_parser("arrangements", help="print arrangements of domain variables")
    _add_common(p)
    p.add_argument("--vars", help="comma-separated variables instead of a formula")
    p = sub.add_parser("corpus", help="regression run over a directory of .rdf files")
    p.add_argument("directory")
    p.add_argument("--config")
    p.add_argument("--branch-cap", type=int)
    p.add_argument("--arrangement-cap", type=int)
    _add_solver(p)
    return ap


def _settings(args) -> dict:
    s = read_config_file(args.config) if getattr(args, "config", None) else {}
    for key in CONFIG_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            s[key] = v
    return s


def _config(args) -> Config:
    s = _settings(args)
    if getattr(args, "no_solver", False):
        solver = None
    else:
        solver = s.get("solver") or default_solver()
    budget = SearchBudget(seed=s.get("seed", 0))
    kw = {k: s[k] for k in ("timeout", "arrangement_cap", "branch_cap", "samples", "tolerance", "workers") if k in s}
    if s.get("output_dir"):
        kw["output_dir"] = Path(s["output_dir"])
    try:
        return Config(solver=solver, budget=budget, **kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _read_formula(args):
    if args.expr is not None:
        text = args.expr
    elif args.input in (None,):
        raise UsageError("no input: give a file, - for stdin, or --expr")
    elif args.input == "-":
        text = sys.stdin.read()
    else:
        try:
            text = Path(args.input).read_text(encoding="utf-8")
        except OSError as exc:
            raise UsageError(str(exc)) from None
    return parse(text)


def _err(msg):
    print(f"rdfsat: {msg}", file=sys.stderr)


def cmd_check(args, with_model=False) -> int:
    config = _config(args)
    formula = _read_formula(args)
    d = decide(formula, config)
    print(d.status)
    if d.status == "sat":
        print(f"certification: {d.certification}")
        if d.message:
            _err(d.message)
        if d.model is not None:
            doc = dump_witness(d.model)
            if config.output_dir is not None:
                (config.output_dir / "witness.json").write_text(doc + "\n")
                print(f"witness: {config.output_dir / 'witness.json'}")
            if with_model:
                print(doc)
                print(d.report)
    else:
        if d.message:
            _err(d.message)
        for r in d.records:
            line = f"branch {r.branch}.{r.step1} [{r.arrangement}]: {r.status} ({r.solver}, {r.wall_time:.3f}s)"
            if r.transcript:
                line += f" transcript={r.transcript}"
            print(line, file=sys.stderr if d.status == "unknown" else sys.stdout)
    return EXIT[d.status]


def cmd_reduce(args) -> int:
    s = _settings(args)
    formula = desugar_constants(_read_formula(args))
    out = Path(s.get("output_dir") or args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    n = 0
    for bi, c in enumerate(normalize(formula, s.get("branch_cap", 10_000))):
        seen = {}
        for k, path in enumerate(reduction_paths(c, s.get("arrangement_cap", 7), s.get("branch_cap", 10_000))):
            si = seen.setdefault(path.positive, len(seen))
            name = out / f"b{bi}_s{si}_{k:03d}.smt2"
            name.write_text(f"; arrangement {path.arrangement}\n" + emit_exchange(path.formula))
            print(name)
            n += 1
    _err(f"{n} exchange files written to {out}")
    return 0


def cmd_normalize(args) -> int:
    s = _settings(args)
    formula = desugar_constants(_read_formula(args))
    for i, c in enumerate(normalize(formula, s.get("branch_cap", 10_000))):
        print(f"[{i}] {c}")
    return 0


def cmd_arrangements(args) -> int:
    s = _settings(args)
    cap = s.get("arrangement_cap", 7)
    if args.vars is not None:
        groups = [[v.strip() for v in args.vars.split(",") if v.strip()]]
    else:
        formula = desugar_constants(_read_formula(args))
        groups = [conjunct_domain_vars(c) for c in normalize(formula, s.get("branch_cap", 10_000))]
    for i, vs in enumerate(groups):
        arrs = list(enumerate_arrangements(vs, cap))
        print(f"# domain variables {vs}: {len(arrs)} arrangements")
        for a in arrs:
            print(a)
    return 0


def cmd_corpus(args) -> int:
    config = _config(args)
    root = Path(args.directory)
    files = sorted(root.glob("*.rdf"))
    if not files:
        raise UsageError(f"no .rdf files in {root}")
    failures = 0
    for f in files:
        side = f.with_suffix(".expected")
        expected = side.read_text().split()[0] if side.exists() else None
        try:
            d = decide(parse(f.read_text(encoding="utf-8")), config)
            got = d.status
        except (ParseError, ValidationError) as exc:
            got = "error"
            _err(f"{f.name}: {exc}")
        ok = expected is None or got == expected or (got == "unknown" and not config.solver and expected == "unsat")
        failures += not ok
        print(f"{'PASS' if ok else 'FAIL'} {f.name}: got {got}, expected {expected}")
    return 0 if failures == 0 else 2


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        if args.command == "check":
            return cmd_check(args)
        if args.command == "model":
            return cmd_check(args, with_model=True)
        if args.command == "reduce":
            return cmd_reduce(args)
        if args.command == "normalize":
            return cmd_normalize(args)
        if args.command == "arrangements":
            return cmd_arrangements(args)
        if args.command == "corpus":
            return cmd_corpus(args)
    except (ParseError, ValidationError, UsageError) as exc:
        _err(str(exc))
        return EXIT_USAGE
    except (BranchExplosion, ArrangementExplosion) as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_USAGE
    except (SolverNotFound, ProtocolError) as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_BACKEND
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
