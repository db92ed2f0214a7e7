"""Existential real-arithmetic formulas: exact evaluation, SMT-LIB emission,
an external solver driver, and a sat-only internal search.

A :class:`TarskiFormula` is a conjunction of boolean combinations of
polynomial atoms ``p rel 0`` with ``rel`` in ``=``, ``<``, ``<=``. All
variables are implicitly existentially quantified.
"""

from __future__ import annotations

import os
import random
import re
import shlex
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Union

from .polynomial import Poly

__all__ = [
    "PAtom", "PAnd", "POr", "PNot", "PImplies", "TarskiFormula", "SolveResult",
    "SearchBudget", "SolverConfig", "UnassignedVariable", "SolverNotFound",
    "ProtocolError", "eq", "lt", "le", "gt", "ge", "ne", "emit_exchange",
    "evaluate_exact", "search_internal", "solve_external", "parse_model",
    "SOLVER_ENV", "DEFAULT_SOLVER_COMMAND",
]

SOLVER_ENV = "RDFSAT_SOLVER"
DEFAULT_SOLVER_COMMAND = "z3 -smt2 {file}"


class UnassignedVariable(KeyError):
    pass


class SolverNotFound(RuntimeError):
    pass


class ProtocolError(RuntimeError):
    pass


# ---------------------------------------------------------------- formulas

@dataclass(frozen=True)
class PAtom:
    poly: Poly
    rel: str  # '=', '<', '<='

    def __str__(self):
        return f"{self.poly} {self.rel} 0"


@dataclass(frozen=True)
class PAnd:
    items: tuple

    def __str__(self):
        return "(" + " & ".join(map(str, self.items)) + ")"


@dataclass(frozen=True)
class POr:
    items: tuple

    def __str__(self):
        return "(" + " | ".join(map(str, self.items)) + ")"


@dataclass(frozen=True)
class PNot:
    item: object

    def __str__(self):
        return f"!({self.item})"


@dataclass(frozen=True)
class PImplies:
    ante: object
    cons: object

    def __str__(self):
        return f"({self.ante} -> {self.cons})"


Node = Union[PAtom, PAnd, POr, PNot, PImplies]


def eq(a, b) -> PAtom:
    return PAtom(Poly.lift(a) - Poly.lift(b), "=")


def lt(a, b) -> PAtom:
    return PAtom(Poly.lift(a) - Poly.lift(b), "<")


def le(a, b) -> PAtom:
    return PAtom(Poly.lift(a) - Poly.lift(b), "<=")


def gt(a, b) -> PAtom:
    return lt(b, a)


def ge(a, b) -> PAtom:
    return le(b, a)


def ne(a, b) -> PNot:
    return PNot(eq(a, b))


def _node_vars(node, out: set):
    if isinstance(node, PAtom):
        out |= node.poly.vars()
    elif isinstance(node, (PAnd, POr)):
        for it in node.items:
            _node_vars(it, out)
    elif isinstance(node, PNot):
        _node_vars(node.item, out)
    elif isinstance(node, PImplies):
        _node_vars(node.ante, out)
        _node_vars(node.cons, out)
    else:
        raise TypeError(f"not a Tarski node: {node!r}")


@dataclass(frozen=True)
class TarskiFormula:
    variables: tuple
    body: tuple = ()

    @classmethod
    def build(cls, body: Iterable, extra_vars: Iterable[str] = ()) -> "TarskiFormula":
        items = tuple(dict.fromkeys(body))
        names = set(extra_vars)
        for it in items:
            _node_vars(it, names)
        return cls(tuple(sorted(names)), items)

    def atoms(self):
        stack = list(self.body)
        while stack:
            n = stack.pop()
            if isinstance(n, PAtom):
                yield n
            elif isinstance(n, (PAnd, POr)):
                stack.extend(n.items)
            elif isinstance(n, PNot):
                stack.append(n.item)
            elif isinstance(n, PImplies):
                stack.extend((n.ante, n.cons))

    def __str__(self):
        return "\n".join(str(b) for b in self.body) or "true"


# ---------------------------------------------------------------- exact evaluation

def _eval_node(node, a) -> bool:
    if isinstance(node, PAtom):
        v = node.poly.evaluate(a)
        if node.rel == "=":
            return v == 0
        if node.rel == "<":
            return v < 0
        if node.rel == "<=":
            return v <= 0
        raise ValueError(f"relation {node.rel!r}")
    if isinstance(node, PAnd):
        return all(_eval_node(i, a) for i in node.items)
    if isinstance(node, POr):
        return any(_eval_node(i, a) for i in node.items)
    if isinstance(node, PNot):
        return not _eval_node(node.item, a)
    if isinstance(node, PImplies):
        return (not _eval_node(node.ante, a)) or _eval_node(node.cons, a)
    raise TypeError(f"not a Tarski node: {node!r}")


def evaluate_exact(formula: TarskiFormula, assignment: Mapping[str, Fraction]) -> bool:
    missing = [v for v in formula.variables if v not in assignment]
    if missing:
        raise UnassignedVariable(missing)
    a = {k: Fraction(v) for k, v in assignment.items()}
    return all(_eval_node(n, a) for n in formula.body)


# ---------------------------------------------------------------- SMT-LIB

def _num(c: Fraction) -> str:
    if c.denominator == 1:
        return f"{c.numerator}.0"
    return f"(/ {c.numerator}.0 {c.denominator}.0)"


def _smt_sum(terms) -> str:
    if not terms:
        return "0.0"
    parts = []
    for m, c in terms:
        factors = [v for v, e in m for _ in range(e)]
        if not factors:
            parts.append(_num(c))
        elif c == 1:
            parts.append(factors[0] if len(factors) == 1 else f"(* {' '.join(factors)})")
        else:
            parts.append(f"(* {_num(c)} {' '.join(factors)})")
    return parts[0] if len(parts) == 1 else f"(+ {' '.join(parts)})"


def _smt(node) -> str:
    if isinstance(node, PAtom):
        terms = node.poly.sorted_terms()
        lhs = [(m, c) for m, c in terms if c > 0]
        rhs = [(m, -c) for m, c in terms if c < 0]
        return f"({node.rel} {_smt_sum(lhs)} {_smt_sum(rhs)})"
    if isinstance(node, PAnd):
        return "(and " + " ".join(_smt(i) for i in node.items) + ")" if node.items else "true"
    if isinstance(node, POr):
        return "(or " + " ".join(_smt(i) for i in node.items) + ")" if node.items else "false"
    if isinstance(node, PNot):
        return f"(not {_smt(node.item)})"
    if isinstance(node, PImplies):
        return f"(=> {_smt(node.ante)} {_smt(node.cons)})"
    raise TypeError(f"not a Tarski node: {node!r}")


def _smt_symbol(name: str) -> str:
    if re.fullmatch(r"[A-Za-z_~!@$%^&*+=<>.?/\-][A-Za-z0-9_~!@$%^&*+=<>.?/\-']*", name) and "'" not in name:
        return name
    return f"|{name}|"


def emit_exchange(formula: TarskiFormula) -> str:
    """SMT-LIB 2 script (logic QF_NRA) ending in ``(check-sat)``; byte-stable."""
    ren = {v: _smt_symbol(v) for v in formula.variables}
    lines = ["(set-logic QF_NRA)"]
    for v in formula.variables:
        lines.append(f"(declare-fun {ren[v]} () Real)")
    body = formula.body or ()
    if not body:
        lines.append("(assert true)")
    for node in body:
        text = _smt(node)
        if any(ren[v] != v for v in formula.variables):
            for v, s in ren.items():
                if s != v:
                    text = re.sub(rf"(?<![\w|']){re.escape(v)}(?![\w'|])", s, text)
        lines.append(f"(assert {text})")
    lines.append("(check-sat)")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- results

@dataclass
class SolveResult:
    status: str  # 'sat' | 'unsat' | 'unknown'
    witness: dict | None = None
    validated: bool = False
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SolverConfig:
    command: str = DEFAULT_SOLVER_COMMAND
    timeout: float = 30.0
    transcript_dir: Path | None = None

    def resolved_command(self) -> str:
        return os.environ.get(SOLVER_ENV) or self.command


# ---------------------------------------------------------------- s-expressions / models

def _sexpr_tokens(text: str):
    return re.findall(r"\(|\)|\|[^|]*\||\"(?:[^\"]|\"\")*\"|[^\s()]+", text)


def _parse_sexprs(text: str) -> list:
    toks = _sexpr_tokens(text)
    pos = 0

    def one():
        nonlocal pos
        t = toks[pos]
        pos += 1
        if t == "(":
            items = []
            while pos < len(toks) and toks[pos] != ")":
                items.append(one())
            if pos >= len(toks):
                raise ProtocolError("unbalanced parentheses in solver output")
            pos += 1
            return items
        if t == ")":
            raise ProtocolError("unexpected ')' in solver output")
        return t

    out = []
    while pos < len(toks):
        out.append(one())
    return out


def _value(expr) -> Fraction | None:
    if isinstance(expr, str):
        try:
            return Fraction(expr)
        except ValueError:
            return None
    if not expr:
        return None
    head = expr[0]
    args = [_value(e) for e in expr[1:]]
    if any(a is None for a in args):
        return None
    if head == "-" and len(args) == 1:
        return -args[0]
    if head == "-" and len(args) == 2:
        return args[0] - args[1]
    if head == "/" and len(args) == 2 and args[1] != 0:
        return args[0] / args[1]
    if head == "+":
        return sum(args, Fraction(0))
    if head == "*":
        out = Fraction(1)
        for a in args:
            out *= a
        return out
    return None  # root-obj and friends: irrational


def parse_model(text: str) -> tuple[dict, list[str]]:
    """Values from a ``(get-model)`` response; returns (values, unparsed names)."""
    values, unparsed = {}, []
    for top in _parse_sexprs(text):
        if not isinstance(top, list):
            continue
        items = top[1:] if top and top[0] == "model" else top
        for d in items:
            if isinstance(d, list) and len(d) == 5 and d[0] == "define-fun" and d[2] == []:
                name = d[1][1:-1] if d[1].startswith("|") else d[1]
                v = _value(d[4])
                if v is None:
                    unparsed.append(name)
                else:
                    values[name] = v
    return values, unparsed


def solve_external(formula: TarskiFormula, config: SolverConfig | None = None, tag: str = "query") -> SolveResult:
    """Run an external SMT solver on the emitted script.

    ``config.command`` is a template with a ``{file}`` placeholder; the
    ``RDFSAT_SOLVER`` environment variable overrides it. A returned model is
    re-checked exactly; if that fails the status stays sat with
    ``validated=False``.
    """
    config = config or SolverConfig()
    command = config.resolved_command()
    diag = {"solver": command, "wall_time": 0.0}
    if config.timeout <= 0:
        diag["error"] = "SolverTimeout"
        return SolveResult("unknown", diagnostics=diag)
    script = emit_exchange(formula) + "(get-model)\n(exit)\n"
    tdir = config.transcript_dir
    if tdir is not None:
        tdir = Path(tdir)
        tdir.mkdir(parents=True, exist_ok=True)
        path = tdir / f"{tag}.smt2"
        path.write_text(script)
        cleanup = None
    else:
        fd, name = tempfile.mkstemp(suffix=".smt2", prefix="rdfsat-")
        with os.fdopen(fd, "w") as fh:
            fh.write(script)
        path = Path(name)
        cleanup = path
    argv = [a.replace("{file}", str(path)) for a in shlex.split(command)]
    if not any("{file}" in a for a in shlex.split(command)):
        argv.append(str(path))
    t0 = time.perf_counter()
    try:
        proc = subprocess.run(argv, capture_output=True, text=True, timeout=config.timeout)
    except FileNotFoundError as exc:
        raise SolverNotFound(f"solver executable not found: {argv[0]}") from exc
    except subprocess.TimeoutExpired:
        diag["wall_time"] = time.perf_counter() - t0
        diag["error"] = "SolverTimeout"
        return SolveResult("unknown", diagnostics=diag)
    finally:
        if cleanup is not None:
            cleanup.unlink(missing_ok=True)
    diag["wall_time"] = time.perf_counter() - t0
    out = proc.stdout
    if tdir is not None:
        tpath = tdir / f"{tag}.out"
        tpath.write_text(out + (("\n; stderr\n" + proc.stderr) if proc.stderr else ""))
        diag["transcript"] = str(tpath)
    lines = out.strip().splitlines()
    if not lines:
        raise ProtocolError(f"empty solver output (exit {proc.returncode}): {proc.stderr.strip()}")
    head = lines[0].strip()
    if head in ("unsat", "unknown"):
        return SolveResult(head, diagnostics=diag)
    if head != "sat":
        raise ProtocolError(f"unexpected solver answer: {head!r}")
    values, unparsed = parse_model("\n".join(lines[1:]))
    witness = {v: values.get(v, Fraction(0)) for v in formula.variables}
    validated = not unparsed and evaluate_exact(formula, witness)
    if unparsed:
        diag["irrational"] = unparsed
    return SolveResult("sat", witness=witness, validated=validated, diagnostics=diag)


# ---------------------------------------------------------------- internal search

@dataclass(frozen=True)
class SearchBudget:
    max_steps: int = 4000
    restarts: int = 3
    max_denominator: int = 16
    max_magnitude: int = 64
    enumerate_limit: int = 4096
    seed: int = 0


_EPS = 1e-12
_STRICT = 0.1


def _nnf(node, neg=False):
    """('and'|'or', [..]) or ('atom', poly, rel) with rel in =, !=, <, <=."""
    if isinstance(node, PAtom):
        p, r = node.poly, node.rel
        if not neg:
            return ("atom", p, r)
        if r == "=":
            return ("atom", p, "!=")
        if r == "<":
            return ("atom", -p, "<=")
        return ("atom", -p, "<")
    if isinstance(node, PNot):
        return _nnf(node.item, not neg)
    if isinstance(node, PImplies):
        if neg:
            return ("and", [_nnf(node.ante), _nnf(node.cons, True)])
        return ("or", [_nnf(node.ante, True), _nnf(node.cons)])
    if isinstance(node, (PAnd, POr)):
        is_and = isinstance(node, PAnd) != neg
        return ("and" if is_and else "or", [_nnf(i, neg) for i in node.items])
    raise TypeError(f"not a Tarski node: {node!r}")


def _flatten_and(n, out):
    if n[0] == "and":
        for c in n[1]:
            _flatten_and(c, out)
    else:
        out.append(n)


def _n_vars(n) -> set:
    if n[0] == "atom":
        return n[1].vars()
    s = set()
    for c in n[1]:
        s |= _n_vars(c)
    return s


def _n_code(n, index) -> str:
    if n[0] == "atom":
        p = n[1].to_python(index)
        return {"=": f"_eq({p})", "!=": f"_ne({p})", "<": f"_lt({p})", "<=": f"_le({p})"}[n[2]]
    parts = [_n_code(c, index) for c in n[1]]
    if not parts:
        return "0.0" if n[0] == "and" else "1.0"
    if n[0] == "and":
        return "(" + " + ".join(parts) + ")"
    return "min(" + ", ".join(parts) + (", 1e300" if len(parts) == 1 else "") + ")"


def _eq(p):
    return abs(p) if abs(p) > _EPS else 0.0


def _le(p):
    return p if p > _EPS else 0.0


def _lt(p):
    return p + _STRICT if p > -_EPS else 0.0


def _ne(p):
    return _STRICT if abs(p) <= _EPS else 0.0


_HELPERS = {"_eq": _eq, "_le": _le, "_lt": _lt, "_ne": _ne, "min": min}


class _Problem:
    """Definitions extracted from top-level equalities plus residual constraints."""

    def __init__(self, formula: TarskiFormula):
        self.vars = list(formula.variables)
        self.index = {v: i for i, v in enumerate(self.vars)}
        top = []
        for b in formula.body:
            _flatten_and(_nnf(b), top)
        eqs = [n for n in top if n[0] == "atom" and n[2] == "="]
        rest = [n for n in top if not (n[0] == "atom" and n[2] == "=")]
        single = {v: 0 for v in self.vars}
        occ = {v: 0 for v in self.vars}
        for n in rest:
            vs = _n_vars(n)
            for v in vs:
                occ[v] += 1
                if len(vs) == 1:
                    single[v] += 1
        self.defs: dict[str, Poly] = {}  # var -> polynomial in other vars
        deps: dict[str, set] = {}

        def depends(a, b):  # does a (transitively) depend on b
            stack, seen = [a], set()
            while stack:
                x = stack.pop()
                if x == b:
                    return True
                if x in seen:
                    continue
                seen.add(x)
                stack.extend(deps.get(x, ()))
            return False

        residual_eqs = []
        for n in eqs:
            p = n[1]
            if p.is_zero():
                continue
            cands = []
            for v in sorted(p.vars()):
                if v in self.defs:
                    continue
                c = p.linear_in(v)
                if c is None:
                    continue
                others = p.vars() - {v}
                if any(depends(o, v) for o in others):
                    continue
                cands.append(((single[v], occ[v]), v, c))
            if not cands:
                residual_eqs.append(n)
                continue
            _, v, c = min(cands)
            rest_poly = p.without(((v, 1),))
            self.defs[v] = rest_poly * Fraction(-1, 1) * (Fraction(1) / c)
            deps[v] = rest_poly.vars()
        self.residual = residual_eqs + rest
        # topological order of definitions
        order, state = [], {}

        def visit(v):
            if state.get(v) == 2:
                return
            state[v] = 1
            for d in sorted(deps.get(v, ())):
                if d in self.defs:
                    visit(d)
            state[v] = 2
            order.append(v)

        for v in sorted(self.defs):
            visit(v)
        self.order = order
        self.free = [v for v in self.vars if v not in self.defs]
        # free roots of each variable
        roots: dict[str, set] = {}
        for v in self.vars:
            if v not in self.defs:
                roots[v] = {v}
        for v in order:
            r = set()
            for d in deps[v]:
                r |= roots.get(d, {d})
            roots[v] = r
        self.roots = roots
        # per-constraint free roots
        self.cons_roots = []
        for n in self.residual:
            r = set()
            for v in _n_vars(n):
                r |= roots.get(v, {v})
            self.cons_roots.append(r)
        self._compile()

    def _compile(self):
        idx = self.index
        self.cons_fns = [eval(f"lambda a: {_n_code(n, idx)}", dict(_HELPERS)) for n in self.residual]
        affected_defs: dict[str, list] = {v: [] for v in self.free}
        for d in self.order:
            for r in self.roots[d]:
                if r in affected_defs:
                    affected_defs[r].append(d)
        self.updaters = {}
        self.affected = {}
        for v in self.free:
            lines = [f"    a[{idx[d]}] = {self.defs[d].to_python(idx)}" for d in affected_defs[v]]
            cons = [i for i, r in enumerate(self.cons_roots) if v in r]
            self.affected[v] = cons
            src = "def _u(a):\n" + ("\n".join(lines) + "\n" if lines else "") + "    return " + (
                " + ".join(f"_c{i}(a)" for i in cons) if cons else "0.0")
            env = {f"_c{i}": self.cons_fns[i] for i in cons}
            exec(src, env)
            self.updaters[v] = env["_u"]
        lines = [f"    a[{idx[d]}] = {self.defs[d].to_python(idx)}" for d in self.order]
        src = "def _p(a):\n" + ("\n".join(lines) + "\n" if lines else "") + "    return a"
        env: dict = {}
        exec(src, env)
        self.propagate = env["_p"]

    def total(self, a) -> float:
        return sum(f(a) for f in self.cons_fns)

    def exact(self, free_values: Mapping[str, Fraction]) -> dict | None:
        a = {v: Fraction(free_values.get(v, 0)) for v in self.free}
        for d in self.order:
            a[d] = self.defs[d].evaluate(a)
        return a


def _small_values(level: int) -> list[Fraction]:
    vals = {Fraction(0)}
    for n in range(1, level + 1):
        for d in range(1, level + 1):
            vals.add(Fraction(n, d))
            vals.add(Fraction(-n, d))
    return sorted(vals, key=lambda x: (abs(x), x < 0, x))


def search_internal(formula: TarskiFormula, budget: SearchBudget | None = None,
                    initial: Mapping[str, Fraction] | None = None) -> SolveResult:
    """Look for a rational witness; returns sat (validated) or unknown, never unsat."""
    budget = budget or SearchBudget()
    t0 = time.perf_counter()
    diag = {"solver": "internal", "wall_time": 0.0}

    def done(witness=None, **extra):
        diag["wall_time"] = time.perf_counter() - t0
        diag.update(extra)
        if witness is None:
            return SolveResult("unknown", diagnostics=diag)
        return SolveResult("sat", witness=witness, validated=True, diagnostics=diag)

    if not formula.body:
        return done({v: Fraction(0) for v in formula.variables}, method="trivial")
    prob = _Problem(formula)
    free = prob.free
    idx = prob.index
    rng = random.Random(budget.seed)

    def try_exact(values):
        w = prob.exact(values)
        if w is not None and evaluate_exact(formula, w):
            return w
        return None

    def floats(values):
        a = [0.0] * len(prob.vars)
        for v, x in values.items():
            a[idx[v]] = float(x)
        return prob.propagate(a)

    # iterative deepening over small grids while the product stays small
    active = [v for v in free if prob.affected[v]]
    for level in (1, 2, 3):
        vals = _small_values(level)
        if len(vals) ** len(active) > budget.enumerate_limit:
            break
        import itertools
        for combo in itertools.product(vals, repeat=len(active)):
            values = dict(zip(active, combo))
            if prob.total(floats(values)) == 0.0:
                w = try_exact(values)
                if w is not None:
                    return done(w, method="enumeration")

    if not active:
        w = try_exact({})
        return done(w, method="propagation") if w else done(reason="budget exhausted")

    maxd, maxm = budget.max_denominator, budget.max_magnitude
    steps_per_restart = max(1, budget.max_steps // max(1, budget.restarts + 1))
    for restart in range(budget.restarts + 1):
        if restart == 0:
            values = {v: Fraction(initial.get(v, 0)).limit_denominator(maxd) if initial else Fraction(0) for v in free}
        else:
            values = {v: Fraction(rng.randint(-4 * maxd, 4 * maxd), maxd) for v in free}
        a = floats(values)
        cost = prob.total(a)
        best_seen = cost
        for step in range(steps_per_restart):
            if cost <= 0.0:
                w = try_exact(values)
                if w is not None:
                    return done(w, method="hill-climbing", steps=step, restart=restart)
            violated = [i for i, f in enumerate(prob.cons_fns) if f(a) > 0.0]
            if violated and rng.random() < 0.9:
                ci = rng.choice(violated)
                pool = sorted(prob.cons_roots[ci] & set(active))
                v = rng.choice(pool) if pool else rng.choice(active)
            else:
                v = rng.choice(active)
            upd = prob.updaters[v]
            cur = values[v]
            old_part = upd(a)
            cands = {Fraction(0), Fraction(1), Fraction(-1)}
            for s in (Fraction(1), Fraction(1, 2), Fraction(1, 4), Fraction(1, maxd), Fraction(4)):
                cands.add(cur + s)
                cands.add(cur - s)
            for _ in range(3):
                cands.add(Fraction(rng.randint(-maxm * maxd, maxm * maxd), rng.randint(1, maxd)))
            others = rng.sample(active, min(3, len(active)))
            for o in others:
                cands.add(values[o])
                cands.add(values[o] + Fraction(1, maxd))
                cands.add(values[o] - Fraction(1, maxd))
            cands.discard(cur)
            best_val, best_part = cur, old_part
            ties = []
            for c in sorted(cands):
                if abs(c) > maxm or c.denominator > maxd:
                    continue
                a[idx[v]] = float(c)
                part = upd(a)
                if part < best_part - 1e-15:
                    best_val, best_part, ties = c, part, []
                elif abs(part - best_part) <= 1e-15 and c != cur:
                    ties.append(c)
            if best_val == cur and ties and rng.random() < 0.5:
                best_val = rng.choice(ties)
                best_part = old_part
            elif best_val == cur and rng.random() < 0.05:
                best_val = rng.choice(sorted(cands))
            a[idx[v]] = float(best_val)
            new_part = upd(a)
            values[v] = best_val
            cost = cost - old_part + new_part
            if cost < 1e-9:
                cost = prob.total(a)
            best_seen = min(best_seen, cost)
    return done(reason="budget exhausted")
