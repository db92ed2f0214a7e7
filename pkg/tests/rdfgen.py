"""Random generators shared by the test-suite.

``planted_conjunct`` draws a concrete model first (rational chain points and
quadratic functions) and then keeps only literals that hold in it, so every
generated conjunct is satisfiable by construction.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction as F

from rdfsat.normalizer import (
    App, Conjunct, ConstDef, DApp, DerRelL, FunEqL, FunGtL, Pos, ShapeL, Sum,
)
from rdfsat.semantics import ExplicitModel
from hypothesis import strategies as st

from rdfsat.syntax import (
    NEG_INF, POS_INF, And, Apply, BinOp, Const, Deriv, DerRel, FunEq, FunGt, Not, NumRel, Or,
    Shape, Var,
)
from rdfsat.witness import PiecewiseModel, SegmentPiece, TailPiece


@dataclass
class Quad:
    a: F
    b: F
    c: F

    def value(self, x):
        return self.a * x * x + self.b * x + self.c

    def deriv(self, x):
        return 2 * self.a * x + self.b

    def min_max_deriv(self, lo, hi):
        ds = [self.deriv(lo), self.deriv(hi)]
        return min(ds), max(ds)


def quad_model(q: Quad, lo: float = -50.0, hi: float = 50.0) -> PiecewiseModel:
    """Exact quadratic on [lo, hi] with linear tails (C1)."""
    lo_f, hi_f = F(lo), F(hi)
    knots = ((lo, float(q.deriv(lo_f))), (hi, float(q.deriv(hi_f))))
    seg = SegmentPiece(lo, hi, float(q.value(lo_f)), knots)
    left = TailPiece("left", lo, float(q.value(lo_f)), float(q.deriv(lo_f)), float(q.deriv(lo_f)))
    right = TailPiece("right", hi, float(q.value(hi_f)), float(q.deriv(hi_f)), float(q.deriv(hi_f)))
    return PiecewiseModel((lo_f, hi_f), (q.value(lo_f), q.value(hi_f)),
                          (q.deriv(lo_f), q.deriv(hi_f)), (left, seg, right))


def _endpoint(rng, dom, allow_inf=True):
    if allow_inf and rng.random() < 0.15:
        return None
    return rng.choice(dom)


def planted_conjunct(rng: random.Random, max_functions=3, max_domain=4, max_functional=10,
                     negated=False):
    """(conjunct, planted ExplicitModel)."""
    nf = rng.randint(1, max_functions)
    nd = rng.randint(1, max_domain)
    fns = ["f", "g", "h"][:nf]
    dom = ["a", "b", "c", "d"][:nd]
    xs = sorted(rng.sample(range(-6, 7), nd))
    rng.shuffle(xs)
    val = {v: F(x) for v, x in zip(dom, xs)}
    quads = {}
    for f in fns:
        if quads and rng.random() < 0.3:
            quads[f] = quads[rng.choice(list(quads))]
        else:
            quads[f] = Quad(F(rng.choice([-1, 0, 0, 1, 2]), rng.choice([1, 2])), F(rng.randint(-3, 3)), F(rng.randint(-4, 4)))
    lits = []
    counter = [0]

    def fresh():
        counter[0] += 1
        return f"_z{counter[0]}"

    # ordering facts between consecutive domain variables
    order = sorted(dom, key=lambda v: val[v])
    for u, v in zip(order, order[1:]):
        if rng.random() < 0.8:
            d = fresh()
            lits += [Sum(v, u, d), Pos(d)]
            val[d] = val[v] - val[u]

    n_fun = rng.randint(1, max_functional)
    tries = 0
    while sum(isinstance(l, (FunEqL, FunGtL, DerRelL, ShapeL)) for l in lits) < n_fun and tries < 200:
        tries += 1
        kind = rng.choice(["eq", "gt", "der", "shape", "shape", "der"])
        f = rng.choice(fns)
        q = quads[f]
        lo = _endpoint(rng, dom)
        hi = _endpoint(rng, dom)
        lo_e = NEG_INF if lo is None else lo
        hi_e = POS_INF if hi is None else hi
        lo_v = None if lo is None else val[lo]
        hi_v = None if hi is None else val[hi]
        bounded = lo_v is not None and hi_v is not None
        empty = bounded and lo_v > hi_v
        if kind == "eq":
            g = rng.choice(fns)
            point = bounded and lo_v == hi_v
            truth = quads[g] == q or empty or (point and quads[g].value(lo_v) == q.value(lo_v))
            lit = FunEqL(f, g, lo_e, hi_e, truth)
        elif kind == "gt":
            if not bounded:
                continue
            g = rng.choice(fns)
            if g == f:
                continue
            dq = Quad(q.a - quads[g].a, q.b - quads[g].b, q.c - quads[g].c)
            if empty:
                truth = True
            else:
                pts = [lo_v, hi_v]
                if dq.a != 0:
                    v0 = -dq.b / (2 * dq.a)
                    if lo_v <= v0 <= hi_v:
                        pts.append(v0)
                truth = min(dq.value(p) for p in pts) > 0
            lit = FunGtL(f, g, lo, hi, truth)
        elif kind == "der":
            rel = rng.choice(["=", ">", ">=", "<", "<="])
            if not bounded and q.a != 0:
                continue
            if bounded and not empty:
                dmin, dmax = q.min_max_deriv(lo_v, hi_v)
            elif bounded:
                dmin = dmax = F(0)
            else:
                dmin = dmax = q.b
            y = fresh()
            choice = {"=": dmin, ">": dmin - 1, ">=": dmin, "<": dmax + 1, "<=": dmax}[rel]
            if rng.random() < 0.25:
                choice += rng.choice([-1, 1])
            val[y] = choice
            lits.append(ConstDef(y, choice))
            ok = {"=": dmin == choice == dmax, ">": dmin > choice, ">=": dmin >= choice,
                  "<": dmax < choice, "<=": dmax <= choice}[rel] or empty
            lit = DerRelL(f, rel, y, lo_e, hi_e, ok)
        else:
            kind2 = rng.choice(["StrictUp", "StrictDown", "Convex", "Concave", "StrictConvex", "StrictConcave"])
            if not bounded and kind2.startswith("StrictCon"):
                # the planted quadratic has linear tails
                continue
            vac = bounded and lo_v >= hi_v
            if kind2 in ("StrictUp", "StrictDown"):
                if not bounded and q.a != 0:
                    continue
                if bounded and not vac:
                    dmin, dmax = q.min_max_deriv(lo_v, hi_v)
                else:
                    dmin = dmax = q.b
                if kind2 == "StrictUp":
                    truth = vac or (dmin >= 0 and dmax > 0)
                else:
                    truth = vac or (dmax <= 0 and dmin < 0)
            elif kind2 == "Convex":
                truth = vac or q.a >= 0
            elif kind2 == "Concave":
                truth = vac or q.a <= 0
            elif kind2 == "StrictConvex":
                truth = vac or q.a > 0
            else:
                truth = vac or q.a < 0
            lit = ShapeL(kind2, f, lo_e, hi_e, truth)
        if not lit.positive and not negated:
            continue
        if not lit.positive and any(isinstance(l, (FunEqL, FunGtL, DerRelL, ShapeL)) and not l.positive
                                    for l in lits):
            continue
        if not lit.positive and isinstance(lit, ShapeL) and len(dom) > 2:
            continue
        lits.append(lit)
    # function samples referenced by arithmetic
    for f in fns:
        if rng.random() < 0.4:
            x = rng.choice(dom)
            y = fresh()
            lits.append(App(y, f, x))
            val[y] = quads[f].value(val[x])
        if rng.random() < 0.3:
            x = rng.choice(dom)
            y = fresh()
            lits.append(DApp(y, f, x))
            val[y] = quads[f].deriv(val[x])
    conj = Conjunct(tuple(dict.fromkeys(lits)), prefix="_")
    model = ExplicitModel(dict(val), {f: quad_model(quads[f]) for f in fns})
    return conj, model


# ---------------------------------------------------------------- propositional formulas

def random_prop_formula(rng: random.Random, atoms, depth=4):
    if depth == 0 or rng.random() < 0.25:
        a = rng.choice(atoms)
        return Not(a) if rng.random() < 0.3 else a
    op = rng.choice(["and", "or", "not"])
    if op == "not":
        return Not(random_prop_formula(rng, atoms, depth - 1))
    l, r = random_prop_formula(rng, atoms, depth - 1), random_prop_formula(rng, atoms, depth - 1)
    return And(l, r) if op == "and" else Or(l, r)


def opaque_atoms(n):
    return [NumRel("=", Var(f"p{i}"), Var(f"q{i}")) for i in range(n)]


# ---------------------------------------------------------------- hypothesis strategies

names = st.sampled_from(["a", "b", "x", "y", "t"])
funcs = st.sampled_from(["f", "g"])
consts = st.fractions(min_value=-5, max_value=5, max_denominator=4).map(Const)

terms = st.recursive(
    st.one_of(names.map(Var), consts),
    lambda sub: st.one_of(
        st.builds(BinOp, st.sampled_from(["+", "-", "*", "/"]), sub, sub),
        st.builds(Apply, funcs, sub),
        st.builds(Deriv, funcs, sub),
    ),
    max_leaves=6,
)
ends = st.one_of(names.map(Var), consts)
atom_st = st.one_of(
    st.builds(NumRel, st.sampled_from(["=", ">"]), terms, terms),
    st.builds(FunEq, funcs, funcs, st.one_of(ends, st.just(NEG_INF)), st.one_of(ends, st.just(POS_INF))),
    st.builds(FunGt, funcs, funcs, ends, ends),
    st.builds(DerRel, funcs, st.sampled_from(["=", ">", ">=", "<", "<="]), terms,
              st.one_of(ends, st.just(NEG_INF)), st.one_of(ends, st.just(POS_INF))),
    st.builds(Shape, st.sampled_from(["Up", "Down", "StrictUp", "StrictDown", "Convex", "Concave",
                                      "StrictConvex", "StrictConcave"]), funcs,
              st.one_of(ends, st.just(NEG_INF)), st.one_of(ends, st.just(POS_INF))),
)
formulas = st.recursive(
    atom_st,
    lambda sub: st.one_of(st.builds(Not, sub), st.builds(And, sub, sub), st.builds(Or, sub, sub)),
    max_leaves=6,
)


# ---------------------------------------------------------------- segment datasets

SEGMENT_SHAPES = ("none", "convex", "strict_convex", "concave", "strict_concave",
                  "strict_up", "strict_down", "der")


def _between(rng, lo, hi, strict=True):
    """Random rational strictly inside (lo, hi)."""
    k = rng.randint(1, 7)
    return lo + (hi - lo) * F(k, 8)


def feasible_segment(rng: random.Random, shape: str):
    """(v_lo, v_hi, y_lo, y_hi, t_lo, t_hi, ShapeRequirements) satisfying the exact conditions."""
    from rdfsat.witness import ShapeRequirements
    v_lo = F(rng.randint(-20, 20), rng.choice([1, 2, 4]))
    L = F(rng.randint(1, 40), rng.choice([1, 2, 4, 8]))
    y_lo = F(rng.randint(-30, 30), rng.choice([1, 3]))
    collapse = rng.random() < 0.1
    req = ShapeRequirements()
    if shape == "none":
        t_lo, t_hi, D = (F(rng.randint(-8, 8), rng.choice([1, 2])) for _ in range(3))
    elif shape in ("convex", "strict_convex", "concave", "strict_concave"):
        a, b = sorted(F(rng.randint(-12, 12), rng.choice([1, 2, 3])) for _ in range(2))
        if a == b:
            b = a + 1
        if collapse and not shape.startswith("strict"):
            a = b
            D = a
        else:
            D = _between(rng, a, b)
        t_lo, t_hi = (a, b) if "convex" in shape else (b, a)
        req = ShapeRequirements(**{shape: True})
    elif shape in ("strict_up", "strict_down"):
        t_lo, t_hi = F(rng.randint(0, 6), rng.choice([1, 2])), F(rng.randint(0, 6), rng.choice([1, 2]))
        D = F(rng.randint(1, 10), rng.choice([1, 2, 4]))
        if shape == "strict_down":
            t_lo, t_hi, D = -t_lo, -t_hi, -D
        req = ShapeRequirements(**{shape: True})
    else:
        rel = rng.choice(["=", ">", ">=", "<", "<="])
        y = F(rng.randint(-5, 5))
        if rel == "=":
            t_lo = t_hi = D = y
        else:
            sign = 1 if rel in (">", ">=") else -1
            ends = [y + sign * F(rng.randint(1 if rel in (">", "<") else 0, 6), 2) for _ in range(2)]
            t_lo, t_hi = ends
            D = y + sign * F(rng.randint(1, 6), 3)
            if rel in (">=", "<=") and collapse:
                t_lo = t_hi = D = y
        req = ShapeRequirements(der=((rel, y),))
    return v_lo, v_lo + L, y_lo, y_lo + D * L, t_lo, t_hi, req


def infeasible_segment(rng: random.Random, shape: str):
    from rdfsat.witness import ShapeRequirements
    v_lo = F(rng.randint(-20, 20))
    L = F(rng.randint(1, 20), rng.choice([1, 2]))
    y_lo = F(rng.randint(-10, 10))
    a, b = sorted(F(rng.randint(-12, 12), rng.choice([1, 2])) for _ in range(2))
    if a == b:
        b = a + 1
    if shape in ("convex", "strict_convex"):
        t_lo, t_hi = a, b
        D = rng.choice([a - F(rng.randint(1, 5), 2), b + F(rng.randint(1, 5), 2), a, b])
        req = ShapeRequirements(**{shape: True})
    elif shape in ("concave", "strict_concave"):
        t_lo, t_hi = b, a
        D = rng.choice([a - F(rng.randint(1, 5), 2), b + F(rng.randint(1, 5), 2), a, b])
        req = ShapeRequirements(**{shape: True})
    elif shape == "strict_up":
        t_lo, t_hi, D = rng.choice([(F(-1), F(1), F(1)), (F(1), F(1), F(0)), (F(2), F(-1, 2), F(1)),
                                    (F(1), F(2), F(-1))])
        req = ShapeRequirements(strict_up=True)
    elif shape == "strict_down":
        t_lo, t_hi, D = rng.choice([(F(1), F(-1), F(-1)), (F(-1), F(-1), F(0)), (F(-1), F(-1), F(1))])
        req = ShapeRequirements(strict_down=True)
    elif shape == "der":
        rel = rng.choice([">", ">=", "<", "<=", "="])
        y = F(rng.randint(-4, 4))
        sign = 1 if rel in (">", ">=") else -1
        good = y + sign
        bad = y - sign if rel != "=" else y + 1
        t_lo, t_hi, D = rng.choice([(bad, good, good), (good, bad, good), (good, good, bad)])
        if rel in (">", "<") and rng.random() < 0.3:
            t_lo, t_hi, D = good, good, y  # strict bound touched by the mean slope
        if rel in (">=", "<=") and rng.random() < 0.3:
            t_lo, t_hi, D = y, good, y  # mean slope on the bound without collapse
        req = ShapeRequirements(der=((rel, y),))
    else:
        raise ValueError(shape)
    return v_lo, v_lo + L, y_lo, y_lo + D * L, t_lo, t_hi, req


def dense_shape_violations(piece, data, n=10_000, tol=1e-6):
    """Independent finite-difference check of a fitted piece; returns failure strings."""
    v_lo, v_hi, y_lo, y_hi, t_lo, t_hi, req = data
    out = []
    lo, hi = float(v_lo), float(v_hi)
    scale = max(1.0, abs(float(y_lo)), abs(float(y_hi)))
    if abs(piece.value(lo) - float(y_lo)) > 1e-9 * scale or abs(piece.value(hi) - float(y_hi)) > 1e-9 * scale:
        out.append("endpoint value")
    if abs(piece.derivative(lo) - float(t_lo)) > 1e-9 or abs(piece.derivative(hi) - float(t_hi)) > 1e-9:
        out.append("endpoint derivative")
    xs = [lo + (hi - lo) * k / n for k in range(n + 1)]
    ys = [piece.value(x) for x in xs]
    h = (hi - lo) / n
    slopes = [(b - a) / h for a, b in zip(ys, ys[1:])]
    ftol = tol * max(1.0, max(abs(s) for s in slopes))
    if req.any_convex and any(s1 < s0 - ftol for s0, s1 in zip(slopes, slopes[1:])):
        out.append("convexity")
    if req.any_concave and any(s1 > s0 + ftol for s0, s1 in zip(slopes, slopes[1:])):
        out.append("concavity")
    if req.strict_up and any(b < a - tol * scale for a, b in zip(ys, ys[1:])):
        out.append("increase")
    if req.strict_up and not ys[-1] > ys[0]:
        out.append("strict increase")
    if req.strict_down and any(b > a + tol * scale for a, b in zip(ys, ys[1:])):
        out.append("decrease")
    for rel, y in req.der:
        y = float(y)
        ok = {"=": lambda s: abs(s - y) <= ftol, ">": lambda s: s > y - ftol, ">=": lambda s: s >= y - ftol,
              "<": lambda s: s < y + ftol, "<=": lambda s: s <= y + ftol}[rel]
        if not all(ok(s) for s in slopes):
            out.append(f"derivative {rel} {y}")
    return out
