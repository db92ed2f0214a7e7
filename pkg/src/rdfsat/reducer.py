"""Reduction of SNF conjuncts to existential real arithmetic.

The pipeline per conjunct is: remove negated functional literals with
existential gadgets, renormalize, fix an arrangement of the (new) domain
variables, sample every function at every chain point, and finally replace
functional literals by polynomial constraints on the samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

from .arranger import (
    DEFAULT_ARRANGEMENT_CAP, Arrangement, apply_arrangement, consistent,
    enumerate_arrangements, order_facts,
)
from .normalizer import (
    DEFAULT_BRANCH_CAP, App, Conjunct, ConstDef, DApp, DerRelL, Eq, FunEqL,
    FunGtL, FUNCTIONAL_LITERALS, Neq, Pos, Prod, ShapeL, Sum, conjunct_domain_vars,
    extend, renormalize,
)
from .polynomial import Poly
from .syntax import Apply, BinOp, Deriv, Infinity, Not, NumRel, Var, conj
from .tarski import PAnd, PImplies, POr, PNot, TarskiFormula, eq, ge, gt, le, lt

__all__ = [
    "ReductionContext", "MissingChain", "ReductionPath", "step1_remove_negatives",
    "step2_explicit_eval", "step3_remove_functionals", "reduce_ordered", "reduce",
    "reduction_paths", "make_context", "transcribe_literal",
]


class MissingChain(ValueError):
    pass


@dataclass(frozen=True)
class ReductionContext:
    chain: tuple
    functions: tuple
    samples: dict = field(default_factory=dict)     # (f, j) -> (y, t), j 1-based
    asymptotes: dict = field(default_factory=dict)  # f -> (gamma_0, gamma_r)
    aliases: tuple = ()

    @property
    def r(self) -> int:
        return len(self.chain)

    def ind(self, e) -> int:
        if isinstance(e, Infinity):
            return 1 if e.sign < 0 else self.r
        return self.chain.index(e) + 1

    def y(self, f, j):
        return self.samples[(f, j)][0]

    def t(self, f, j):
        return self.samples[(f, j)][1]

    def alias_map(self) -> dict:
        return dict(self.aliases)


def make_context(conjunct: Conjunct) -> ReductionContext:
    if conjunct.chain is None:
        raise MissingChain("conjunct has no arrangement chain")
    p = conjunct.prefix
    fns = tuple(conjunct.functions())
    samples = {}
    asym = {}
    for f in fns:
        for j in range(1, len(conjunct.chain) + 1):
            samples[(f, j)] = (f"{p}y{j}_{f}", f"{p}t{j}_{f}")
        asym[f] = (f"{p}G0_{f}", f"{p}Gr_{f}")
    return ReductionContext(tuple(conjunct.chain), fns, samples, asym, conjunct.aliases)


# ---------------------------------------------------------------- step 1

def _le_guard(a, b):
    """a <= b between endpoints; None when trivially true."""
    if isinstance(a, Infinity) and a.sign < 0:
        return None
    if isinstance(b, Infinity) and b.sign > 0:
        return None
    if isinstance(a, Infinity) or isinstance(b, Infinity):
        raise ValueError("+inf below -inf in a guard")
    return Not(NumRel(">", Var(a), Var(b)))


def _lt(a, b):
    return NumRel(">", b, a)


def _le(a, b):
    return Not(NumRel(">", a, b))


def _sub(a, b):
    return BinOp("-", a, b)


def _gadget(lit, conjunct: Conjunct):
    """Positive existential replacement of a negated functional literal."""
    if isinstance(lit, FunEqL):
        (x, y1, y2), conjunct = conjunct.fresh(3, "g")
        X, Y1, Y2 = Var(x), Var(y1), Var(y2)
        parts = [_le_guard(lit.lo, x), _le_guard(x, lit.hi),
                 NumRel("=", Y1, Apply(lit.f, X)), NumRel("=", Y2, Apply(lit.g, X)),
                 Not(NumRel("=", Y1, Y2))]
    elif isinstance(lit, FunGtL):
        (x, y1, y2), conjunct = conjunct.fresh(3, "g")
        X, Y1, Y2 = Var(x), Var(y1), Var(y2)
        parts = [_le(Var(lit.lo), X), _le(X, Var(lit.hi)),
                 NumRel("=", Y1, Apply(lit.f, X)), NumRel("=", Y2, Apply(lit.g, X)),
                 _le(Y1, Y2)]
    elif isinstance(lit, DerRelL):
        (x, y1), conjunct = conjunct.fresh(2, "g")
        X, Y1, B = Var(x), Var(y1), Var(lit.y)
        comp = {
            "=": Not(NumRel("=", Y1, B)),
            ">": _le(Y1, B),
            ">=": _lt(Y1, B),
            "<": _le(B, Y1),
            "<=": _lt(B, Y1),
        }[lit.rel]
        parts = [_le_guard(lit.lo, x), _le_guard(x, lit.hi),
                 NumRel("=", Y1, Deriv(lit.f, X)), comp]
    elif isinstance(lit, ShapeL) and lit.kind in ("Up", "StrictUp", "Down", "StrictDown"):
        (x1, x2, y1, y2), conjunct = conjunct.fresh(4, "g")
        X1, X2, Y1, Y2 = map(Var, (x1, x2, y1, y2))
        rel = {
            "Up": _lt(Y2, Y1),
            "StrictUp": _le(Y2, Y1),
            "Down": _lt(Y1, Y2),
            "StrictDown": _le(Y1, Y2),
        }[lit.kind]
        parts = [_le_guard(lit.lo, x1), _lt(X1, X2), _le_guard(x2, lit.hi),
                 NumRel("=", Y1, Apply(lit.f, X1)), NumRel("=", Y2, Apply(lit.f, X2)), rel]
    elif isinstance(lit, ShapeL):
        (x1, x2, x3, y1, y2, y3), conjunct = conjunct.fresh(6, "g")
        X1, X2, X3, Y1, Y2, Y3 = map(Var, (x1, x2, x3, y1, y2, y3))
        lhs = BinOp("*", _sub(Y2, Y1), _sub(X3, X1))
        rhs = BinOp("*", _sub(X2, X1), _sub(Y3, Y1))
        rel = {
            "Convex": _lt(rhs, lhs),
            "StrictConvex": _le(rhs, lhs),
            "Concave": _lt(lhs, rhs),
            "StrictConcave": _le(lhs, rhs),
        }[lit.kind]
        parts = [_le_guard(lit.lo, x1), _lt(X1, X2), _lt(X2, X3), _le_guard(x3, lit.hi),
                 NumRel("=", Y1, Apply(lit.f, X1)), NumRel("=", Y2, Apply(lit.f, X2)),
                 NumRel("=", Y3, Apply(lit.f, X3)), rel]
    else:
        raise TypeError(f"not a functional literal: {lit!r}")
    return conj(*(p for p in parts if p is not None)), conjunct


def _negated(lit) -> bool:
    return isinstance(lit, FUNCTIONAL_LITERALS) and not lit.positive


def step1_remove_negatives(conjunct: Conjunct, cap: int = DEFAULT_BRANCH_CAP) -> list[Conjunct]:
    """Replace every negated functional literal by its gadget and renormalize."""
    out: list[Conjunct] = []
    todo = [conjunct]
    while todo:
        c = todo.pop(0)
        neg = next((l for l in c.literals if _negated(l)), None)
        if neg is None:
            for r in renormalize(c, cap):
                if r not in out:
                    out.append(r)
            continue
        rest = c.with_literals(l for l in c.literals if l != neg)
        gadget, rest = _gadget(neg, rest)
        todo.extend(extend(rest, gadget, cap))
        if len(todo) + len(out) > cap:
            from .normalizer import BranchExplosion
            raise BranchExplosion(f"more than {cap} conjuncts after negation removal")
    return out


# ---------------------------------------------------------------- step 2

def step2_explicit_eval(conjunct: Conjunct, ctx: ReductionContext) -> Conjunct:
    if not ctx.functions:
        return conjunct
    pos = {v: j for j, v in enumerate(ctx.chain, start=1)}
    lits = list(conjunct.literals)
    for f in ctx.functions:
        for j, v in enumerate(ctx.chain, start=1):
            lits.append(App(ctx.y(f, j), f, v))
            lits.append(DApp(ctx.t(f, j), f, v))
    for l in conjunct.literals:
        if isinstance(l, App) and l.x in pos and l.y != ctx.y(l.f, pos[l.x]):
            lits.append(Eq(l.y, ctx.y(l.f, pos[l.x])))
        elif isinstance(l, DApp) and l.x in pos and l.y != ctx.t(l.f, pos[l.x]):
            lits.append(Eq(l.y, ctx.t(l.f, pos[l.x])))
    return conjunct.with_literals(lits)


# ---------------------------------------------------------------- step 3

def transcribe_literal(lit):
    if isinstance(lit, Sum):
        return eq(lit.x, Poly.var(lit.y) + Poly.var(lit.w))
    if isinstance(lit, Prod):
        return eq(lit.x, Poly.var(lit.y) * Poly.var(lit.w))
    if isinstance(lit, Pos):
        return gt(lit.x, 0)
    if isinstance(lit, ConstDef):
        return eq(lit.x, lit.c)
    if isinstance(lit, Eq):
        return eq(lit.x, lit.y)
    if isinstance(lit, Neq):
        return PNot(eq(lit.x, lit.y))
    raise TypeError(f"not an arithmetic literal: {lit!r}")


_REL = {"=": eq, ">": gt, ">=": ge, "<": lt, "<=": le}


def _bounds(lit, ctx):
    """0-based inclusive index range and flags for infinite ends, or None when vacuous."""
    lo = ctx.ind(lit.lo) - 1
    hi = ctx.ind(lit.hi) - 1
    left_inf = isinstance(lit.lo, Infinity)
    right_inf = isinstance(lit.hi, Infinity)
    if lo > hi:
        return None
    point = not left_inf and not right_inf and lo == hi
    return lo, hi, left_inf, right_inf, point


def _family(lit, ctx: ReductionContext) -> list:
    b = _bounds(lit, ctx)
    if b is None:
        return []
    lo, hi, left_inf, right_inf, point = b
    ch = ctx.chain
    out = []

    def Y(f, i):
        return ctx.y(f, i + 1)

    def T(f, i):
        return ctx.t(f, i + 1)

    def h(j):
        return Poly.var(ch[j + 1]) - Poly.var(ch[j])

    def dy(f, j):
        return Poly.var(Y(f, j + 1)) - Poly.var(Y(f, j))

    if isinstance(lit, FunEqL):
        f, g = lit.f, lit.g
        for i in range(lo, hi + 1):
            out.append(eq(Y(f, i), Y(g, i)))
            if not point:
                out.append(eq(T(f, i), T(g, i)))
        if left_inf:
            out.append(eq(ctx.asymptotes[f][0], ctx.asymptotes[g][0]))
        if right_inf:
            out.append(eq(ctx.asymptotes[f][1], ctx.asymptotes[g][1]))
    elif isinstance(lit, FunGtL):
        for i in range(lo, hi + 1):
            out.append(gt(Y(lit.f, i), Y(lit.g, i)))
    elif isinstance(lit, DerRelL):
        f, y, rel = lit.f, Poly.var(lit.y), _REL[lit.rel]
        for i in range(lo, hi + 1):
            out.append(rel(T(f, i), y))
        for j in range(lo, hi):
            out.append(rel(dy(f, j), y * h(j)))
            if lit.rel in (">=", "<="):
                out.append(PImplies(eq(dy(f, j), y * h(j)),
                                    PAnd((eq(T(f, j), y), eq(T(f, j + 1), y)))))
        if left_inf:
            out.append(rel(ctx.asymptotes[f][0], y))
        if right_inf:
            out.append(rel(ctx.asymptotes[f][1], y))
    elif isinstance(lit, ShapeL) and lit.kind in ("StrictUp", "StrictDown"):
        if point:
            return out  # single point: vacuous
        up = lit.kind == "StrictUp"
        f = lit.f
        for i in range(lo, hi + 1):
            out.append(ge(T(f, i), 0) if up else le(T(f, i), 0))
        for j in range(lo, hi):
            out.append(gt(Y(f, j + 1), Y(f, j)) if up else lt(Y(f, j + 1), Y(f, j)))
        if left_inf:
            out.append(gt(ctx.asymptotes[f][0], 0) if up else lt(ctx.asymptotes[f][0], 0))
        if right_inf:
            out.append(gt(ctx.asymptotes[f][1], 0) if up else lt(ctx.asymptotes[f][1], 0))
    elif isinstance(lit, ShapeL) and lit.kind in ("Convex", "Concave", "StrictConvex", "StrictConcave"):
        f = lit.f
        strict = lit.kind.startswith("Strict")
        convex = lit.kind.endswith("Convex")
        first, last = T(f, lo), T(f, hi)
        g0, gr = ctx.asymptotes[f]
        if strict:
            rel = lt if convex else gt
        else:
            rel = le if convex else ge
        for i in range(lo, hi):
            d, hh = dy(f, i), h(i)
            ti, tn = Poly.var(T(f, i)), Poly.var(T(f, i + 1))
            out.append(rel(ti * hh, d))
            out.append(rel(d, tn * hh))
            if not strict:
                out.append(PImplies(POr((eq(d, ti * hh), eq(d, tn * hh))), eq(ti, tn)))
        if left_inf:
            out.append(rel(g0, first))
        if right_inf:
            out.append(rel(last, gr))
    else:
        raise TypeError(f"unexpected functional literal {lit!r}")
    return out


def step3_remove_functionals(conjunct: Conjunct, ctx: ReductionContext | None = None) -> TarskiFormula:
    if conjunct.chain is None:
        raise MissingChain("conjunct has no arrangement chain")
    ctx = ctx or make_context(conjunct)
    body = []
    for lit in conjunct.literals:
        if isinstance(lit, FUNCTIONAL_LITERALS):
            if not lit.positive:
                raise ValueError(f"negated functional literal survived step 1: {lit}")
            body.extend(_family(lit, ctx))
        elif isinstance(lit, (App, DApp)):
            continue
        elif isinstance(lit, Eq) and lit.x == lit.y:
            continue
        else:
            body.append(transcribe_literal(lit))
    extra = [v for v in conjunct.variables() if not isinstance(v, Infinity)]
    for f in ctx.functions:
        extra.extend(ctx.asymptotes[f])
        for j in range(1, ctx.r + 1):
            extra.extend(ctx.samples[(f, j)])
    return TarskiFormula.build(body, extra)


def reduce_ordered(conjunct: Conjunct) -> tuple[TarskiFormula, ReductionContext]:
    """Steps 2 and 3 on a conjunct that already carries a chain."""
    ctx = make_context(conjunct)
    return step3_remove_functionals(step2_explicit_eval(conjunct, ctx), ctx), ctx


# ---------------------------------------------------------------- full reduction

@dataclass(frozen=True)
class ReductionPath:
    source: Conjunct        # normalized conjunct before step 1
    positive: Conjunct      # after step 1 (and anchoring)
    arrangement: Arrangement
    ordered: Conjunct
    formula: TarskiFormula
    context: ReductionContext


def _anchor(c: Conjunct) -> Conjunct:
    fns = c.functions()
    if fns and not conjunct_domain_vars(c):
        (a, y), c = c.fresh(2, "a")
        c = c.with_literals(c.literals + (App(y, fns[0], a),))
    return c


def reduction_paths(conjunct: Conjunct, arrangement_cap: int = DEFAULT_ARRANGEMENT_CAP,
                    branch_cap: int = DEFAULT_BRANCH_CAP, prefilter: bool = True) -> Iterator[ReductionPath]:
    """Lazily enumerate (step-1 conjunct, arrangement) reductions."""
    for c1 in step1_remove_negatives(conjunct, branch_cap):
        c1 = _anchor(c1)
        dom = conjunct_domain_vars(c1)
        facts = order_facts(c1, dom) if prefilter else None
        for arr in enumerate_arrangements(dom, arrangement_cap):
            if prefilter and not consistent(arr, facts):
                continue
            ordered = apply_arrangement(c1, arr)
            formula, ctx = reduce_ordered(ordered)
            yield ReductionPath(conjunct, c1, arr, ordered, formula, ctx)


def reduce(conjunct: Conjunct, arrangement_cap: int = DEFAULT_ARRANGEMENT_CAP,
           branch_cap: int = DEFAULT_BRANCH_CAP) -> tuple[TarskiFormula, list[ReductionContext]]:
    """Disjunction over all paths; an ordered input is reduced directly."""
    if conjunct.chain is not None and not any(_negated(l) for l in conjunct.literals):
        f, ctx = reduce_ordered(conjunct)
        return f, [ctx]
    paths = list(reduction_paths(conjunct, arrangement_cap, branch_cap))
    if not paths:
        return TarskiFormula.build([POr(())]), []
    if len(paths) == 1:
        return paths[0].formula, [paths[0].context]
    names = set()
    for p in paths:
        names |= set(p.formula.variables)
    body = POr(tuple(PAnd(p.formula.body) for p in paths))
    return TarskiFormula.build([body], names), [p.context for p in paths]
