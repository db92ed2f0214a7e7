"""Explicit C1 models from reduced-formula witnesses, and their certification.

Bounded segments carry a continuous piecewise-linear derivative (so the
function is piecewise quadratic); unbounded tails carry an exponential
derivative profile with a finite limit at the infinite end. Every derivative
profile is monotone between consecutive knots, which makes derivative bounds
and convexity checkable from knot values alone.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .normalizer import Conjunct, DerRelL, FunEqL, FunGtL, ShapeL
from .semantics import (
    DEFAULT_TOLERANCE, ExplicitModel, Verdict, compare, eval_endpoint, eval_term,
)
from .syntax import DerRel, FunEq, FunGt, Infinity, Not, NumRel, Shape, is_atom

__all__ = [
    "ShapeRequirements", "SegmentPiece", "TailPiece", "PiecewiseModel",
    "InfeasibleSegment", "InfeasibleTail", "ModelConstructionFailure",
    "fit_segment", "fit_tail", "build_model", "check_atom", "certify",
    "CertificationReport", "witness_document", "dump_witness", "load_witness",
    "WITNESS_FORMAT", "DEFAULT_SAMPLES",
]

WITNESS_FORMAT = "rdfsat-witness/1"
DEFAULT_SAMPLES = 2000
GLUE_TOLERANCE = 1e-9


class InfeasibleSegment(ValueError):
    pass


class InfeasibleTail(ValueError):
    pass


class ModelConstructionFailure(RuntimeError):
    pass


# ---------------------------------------------------------------- requirements

@dataclass(frozen=True)
class ShapeRequirements:
    convex: bool = False
    strict_convex: bool = False
    concave: bool = False
    strict_concave: bool = False
    strict_up: bool = False
    strict_down: bool = False
    der: tuple = ()  # (rel, bound) pairs

    def merge(self, other: "ShapeRequirements") -> "ShapeRequirements":
        return ShapeRequirements(
            self.convex or other.convex,
            self.strict_convex or other.strict_convex,
            self.concave or other.concave,
            self.strict_concave or other.strict_concave,
            self.strict_up or other.strict_up,
            self.strict_down or other.strict_down,
            tuple(dict.fromkeys(self.der + other.der)),
        )

    @property
    def any_convex(self):
        return self.convex or self.strict_convex

    @property
    def any_concave(self):
        return self.concave or self.strict_concave


def _holds(a, rel, b) -> bool:
    return {"=": a == b, ">": a > b, ">=": a >= b, "<": a < b, "<=": a <= b}[rel]


_NONSTRICT = {"=": "=", ">": ">=", ">=": ">=", "<": "<=", "<=": "<="}


# ---------------------------------------------------------------- pieces

@dataclass(frozen=True)
class SegmentPiece:
    """f on [lo, hi] with f(lo) = y_lo and f' linear between the knots."""
    lo: float
    hi: float
    y_lo: float
    knots: tuple  # ((x, f'(x)), ...) from lo to hi
    kind: str = "linear-quadratic"

    def __post_init__(self):
        cum = [0.0]
        for (x0, d0), (x1, d1) in zip(self.knots, self.knots[1:]):
            cum.append(cum[-1] + (x1 - x0) * (d0 + d1) / 2)
        object.__setattr__(self, "_cum", tuple(cum))
        object.__setattr__(self, "_xs", tuple(k[0] for k in self.knots))

    def _seg(self, x):
        k = bisect_right(self._xs, x) - 1
        return min(max(k, 0), len(self.knots) - 2)

    def derivative(self, x) -> float:
        x = float(x)
        k = self._seg(x)
        (x0, d0), (x1, d1) = self.knots[k], self.knots[k + 1]
        if x1 == x0:
            return d1
        return d0 + (d1 - d0) * (x - x0) / (x1 - x0)

    def value(self, x) -> float:
        x = float(x)
        k = self._seg(x)
        x0, d0 = self.knots[k]
        return self.y_lo + self._cum[k] + (x - x0) * (d0 + self.derivative(x)) / 2

    def parts(self):
        for (x0, d0), (x1, d1) in zip(self.knots, self.knots[1:]):
            if x1 > x0:
                yield (x0, x1, d0, d1, True, True)

    def chord_deviation(self) -> float:
        """max |f - chord| on the segment, from knots and stationary points."""
        L = self.hi - self.lo
        y_hi = self.value(self.hi)
        slope = (y_hi - self.y_lo) / L

        def g(x):
            return abs(self.value(x) - (self.y_lo + slope * (x - self.lo)))

        best = max(g(x) for x, _ in self.knots)
        for (x0, d0), (x1, d1) in zip(self.knots, self.knots[1:]):
            if x1 > x0 and (d0 - slope) * (d1 - slope) < 0:
                best = max(best, g(x0 + (slope - d0) / (d1 - d0) * (x1 - x0)))
        return best


@dataclass(frozen=True)
class TailPiece:
    """Unbounded piece with f'(x) = gamma + (t - gamma) e^{+-lam (x - v)}."""
    side: str  # 'left' or 'right'
    v: float
    y: float
    t: float
    gamma: float
    lam: float = 1.0
    kind: str = "exponential-tail"

    def _e(self, x):
        s = self.lam * (float(x) - self.v)
        return math.exp(s if self.side == "left" else -s)

    def derivative(self, x) -> float:
        if math.isinf(x):
            return self.gamma
        return self.gamma + (self.t - self.gamma) * self._e(x)

    def value(self, x) -> float:
        x = float(x)
        c = (self.t - self.gamma) / self.lam
        if self.side == "left":
            return self.y + self.gamma * (x - self.v) + c * (self._e(x) - 1.0)
        return self.y + self.gamma * (x - self.v) + c * (1.0 - self._e(x))

    def parts(self):
        if self.side == "left":
            yield (-math.inf, self.v, self.gamma, self.t, False, True)
        else:
            yield (self.v, math.inf, self.t, self.gamma, True, False)


@dataclass(frozen=True)
class PiecewiseModel:
    """C1 function with breakpoints v_1 < ... < v_r and r + 1 pieces."""
    breakpoints: tuple
    values: tuple
    derivs: tuple
    pieces: tuple

    def __post_init__(self):
        object.__setattr__(self, "_index", {b: i for i, b in enumerate(self.breakpoints)})
        object.__setattr__(self, "_fb", tuple(float(b) for b in self.breakpoints))

    @classmethod
    def linear(cls, slope, intercept) -> "PiecewiseModel":
        slope, intercept = Fraction(slope), Fraction(intercept)
        s = float(slope)
        return cls(
            (Fraction(0),), (intercept,), (slope,),
            (TailPiece("left", 0.0, float(intercept), s, s), TailPiece("right", 0.0, float(intercept), s, s)),
        )

    @classmethod
    def constant(cls, c) -> "PiecewiseModel":
        return cls.linear(0, c)

    def piece_at(self, x):
        return self.pieces[bisect_right(self._fb, float(x))]

    def value(self, x):
        i = self._index.get(x)
        if i is not None:
            return self.values[i]
        return self.piece_at(x).value(x)

    def derivative(self, x):
        i = self._index.get(x)
        if i is not None:
            return self.derivs[i]
        return self.piece_at(x).derivative(x)

    def knots(self) -> list[float]:
        out = list(self._fb)
        for p in self.pieces:
            if isinstance(p, SegmentPiece):
                out.extend(x for x, _ in p.knots)
        return sorted(set(out))

    def parts(self, a, b) -> list[tuple]:
        """Monotone derivative parts clipped to [a, b]: (x0, x1, d0, d1, attained0, attained1)."""
        a, b = float(a), float(b)
        if a == b:
            d = float(self.derivative(a))
            return [(a, a, d, d, True, True)]
        out = []
        for piece in self.pieces:
            for x0, x1, d0, d1, at0, at1 in piece.parts():
                lo, hi = max(x0, a), min(x1, b)
                if lo >= hi:
                    continue
                if lo > x0:
                    d0, at0 = piece.derivative(lo), True
                if hi < x1:
                    d1, at1 = piece.derivative(hi), True
                out.append((lo, hi, d0, d1, at0, at1))
        return out

    def pieces_on(self, a, b) -> list:
        a, b = float(a), float(b)
        out = []
        bounds = [-math.inf] + list(self._fb) + [math.inf]
        for piece, lo, hi in zip(self.pieces, bounds, bounds[1:]):
            if hi > a and lo < b:
                out.append(piece)
        return out

    def glue_errors(self) -> list[tuple[float, float]]:
        """(value gap, derivative gap) at every breakpoint."""
        out = []
        for i, x in enumerate(self._fb):
            left, right = self.pieces[i], self.pieces[i + 1]
            out.append((abs(left.value(x) - right.value(x)), abs(left.derivative(x) - right.derivative(x))))
        return out


# ---------------------------------------------------------------- fitting

def _segment_feasible(L, dy, t_lo, t_hi, req: ShapeRequirements) -> str | None:
    """Reason for infeasibility, computed exactly, or None."""
    if L <= 0:
        return "empty segment"
    D = dy / L
    if req.any_convex:
        if not t_lo <= D <= t_hi:
            return f"convexity needs t_lo <= mean slope <= t_hi ({t_lo}, {D}, {t_hi})"
        if (D == t_lo or D == t_hi) and t_lo != t_hi:
            return "mean slope touches an end slope without collapse"
    if req.strict_convex and not t_lo < D < t_hi:
        return f"strict convexity needs t_lo < mean slope < t_hi ({t_lo}, {D}, {t_hi})"
    if req.any_concave:
        if not t_lo >= D >= t_hi:
            return f"concavity needs t_lo >= mean slope >= t_hi ({t_lo}, {D}, {t_hi})"
        if (D == t_lo or D == t_hi) and t_lo != t_hi:
            return "mean slope touches an end slope without collapse"
    if req.strict_concave and not t_lo > D > t_hi:
        return f"strict concavity needs t_lo > mean slope > t_hi ({t_lo}, {D}, {t_hi})"
    if req.strict_up and not (t_lo >= 0 and t_hi >= 0 and D > 0):
        return "strict increase needs nonnegative end slopes and positive mean slope"
    if req.strict_down and not (t_lo <= 0 and t_hi <= 0 and D < 0):
        return "strict decrease needs nonpositive end slopes and negative mean slope"
    for rel, y in req.der:
        y = Fraction(y)
        if not (_holds(t_lo, rel, y) and _holds(t_hi, rel, y) and _holds(D, rel, y)):
            return f"derivative bound {rel} {y} violated by end or mean slope"
        if rel in (">=", "<=") and D == y and not (t_lo == y == t_hi):
            return f"mean slope equals bound {y} but end slopes differ"
    return None


def _profile_ok(knots, req: ShapeRequirements) -> bool:
    ds = [d for _, d in knots]
    steps = [(d1 - d0, x1 - x0) for (x0, d0), (x1, d1) in zip(knots, knots[1:])]
    if req.any_convex and any(dd < 0 for dd, _ in steps):
        return False
    if req.strict_convex and any(dd <= 0 for dd, dx in steps if dx > 0):
        return False
    if req.any_concave and any(dd > 0 for dd, _ in steps):
        return False
    if req.strict_concave and any(dd >= 0 for dd, dx in steps if dx > 0):
        return False
    inner = ds[1:-1]
    if req.strict_up and (min(ds) < 0 or any(d <= 0 for d in inner)):
        return False
    if req.strict_down and (max(ds) > 0 or any(d >= 0 for d in inner)):
        return False
    for rel, y in req.der:
        y = float(y)
        if not all(_holds(d, rel, y) for d in ds):
            return False
    return True


def fit_segment(v_lo, v_hi, y_lo, y_hi, t_lo, t_hi, shape_requirements: ShapeRequirements | None = None,
                max_deviation: float = math.inf, max_tries: int = 60) -> SegmentPiece:
    """Fit a C1 piece through (v_lo, y_lo, t_lo) and (v_hi, y_hi, t_hi).

    Feasibility is decided exactly on the rational data. The derivative rises
    (or falls) linearly from t_lo to a plateau inside boundary layers of
    width w; the plateau level follows from the integral condition and w
    shrinks geometrically until every requirement holds on the knots.
    """
    req = shape_requirements or ShapeRequirements()
    ex = [Fraction(v) for v in (v_lo, v_hi, y_lo, y_hi, t_lo, t_hi)]
    L, dy = ex[1] - ex[0], ex[3] - ex[2]
    why = _segment_feasible(L, dy, ex[4], ex[5], req)
    if why:
        raise InfeasibleSegment(why)
    lo, hi, ylo = float(ex[0]), float(ex[1]), float(ex[2])
    tl, th = float(ex[4]), float(ex[5])
    D = dy / L
    if ex[4] == ex[5] == D:
        return SegmentPiece(lo, hi, ylo, ((lo, tl), (hi, th)))
    Lf, Df = float(L), float(D)
    frac = 0.25
    sigma = 1.0
    for _ in range(max_tries):
        w = Lf * frac
        p = (Df * Lf - w * (tl + th) / 2) / (Lf - w)
        s = 0.0
        if req.strict_convex:
            s = sigma * min(p - tl, th - p) / 3
        elif req.strict_concave:
            s = -sigma * min(tl - p, p - th) / 3
        knots = ((lo, tl), (lo + w, p - s), (hi - w, p + s), (hi, th))
        if _profile_ok(knots, req):
            piece = SegmentPiece(lo, hi, ylo, knots)
            if piece.chord_deviation() < max_deviation:
                return piece
        frac /= 2
        sigma /= 2
    raise InfeasibleSegment("boundary layers shrank without meeting the requirements")


def _tail_feasible(side, t, g, req: ShapeRequirements) -> str | None:
    # derivative runs from g (at -inf) to t for a left tail, t to g for a right one
    first, last = (g, t) if side == "left" else (t, g)
    if req.any_convex and not first <= last:
        return "convex tail needs a nondecreasing derivative"
    if req.strict_convex and not first < last:
        return "strictly convex tail needs an increasing derivative"
    if req.any_concave and not first >= last:
        return "concave tail needs a nonincreasing derivative"
    if req.strict_concave and not first > last:
        return "strictly concave tail needs a decreasing derivative"
    if req.strict_up and not (g > 0 and t >= 0):
        return "strictly increasing tail needs positive asymptotic slope"
    if req.strict_down and not (g < 0 and t <= 0):
        return "strictly decreasing tail needs negative asymptotic slope"
    for rel, y in req.der:
        y = Fraction(y)
        if not (_holds(t, rel, y) and _holds(g, _NONSTRICT[rel], y)):
            return f"tail violates derivative bound {rel} {y}"
    return None


def fit_tail(side: str, v_bound, y_bound, t_bound, gamma, shape_requirements: ShapeRequirements | None = None,
             max_tries: int = 20) -> TailPiece:
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    req = shape_requirements or ShapeRequirements()
    t, g = Fraction(t_bound), Fraction(gamma)
    why = _tail_feasible(side, t, g, req)
    if why:
        raise InfeasibleTail(why)
    lam = 1.0
    for _ in range(max_tries):
        piece = TailPiece(side, float(Fraction(v_bound)), float(Fraction(y_bound)), float(t), float(g), lam)
        if _tail_sampled_ok(piece, req):
            return piece
        lam *= 2
    raise InfeasibleTail("no rate passed the sampled shape check")


def _tail_sampled_ok(piece: TailPiece, req: ShapeRequirements, n: int = 64) -> bool:
    sgn = -1 if piece.side == "left" else 1
    xs = [piece.v + sgn * 8.0 * k / n / piece.lam for k in range(n + 1)]
    ds = [piece.derivative(x) for x in xs]
    if not all(math.isfinite(d) for d in ds):
        return False
    if piece.side == "left":
        ds = ds[::-1]
    steps = [b - a for a, b in zip(ds, ds[1:])]
    tol = 1e-12 * (1 + abs(piece.t) + abs(piece.gamma))
    if req.any_convex and any(s < -tol for s in steps):
        return False
    if req.any_concave and any(s > tol for s in steps):
        return False
    return True


# ---------------------------------------------------------------- model building

def _covered(lit, ctx) -> list:
    """Segment ids covered by a non-point interval literal."""
    lo, hi = ctx.ind(lit.lo) - 1, ctx.ind(lit.hi) - 1
    left_inf, right_inf = isinstance(lit.lo, Infinity), isinstance(lit.hi, Infinity)
    if lo > hi or (lo == hi and not left_inf and not right_inf):
        return []
    out = list(range(lo, hi))
    if left_inf:
        out.insert(0, "L")
    if right_inf:
        out.append("R")
    return out


def _req_of(lit, value) -> ShapeRequirements | None:
    if isinstance(lit, DerRelL):
        return ShapeRequirements(der=((lit.rel, value(lit.y)),))
    if isinstance(lit, ShapeL):
        k = lit.kind
        return ShapeRequirements(
            convex=k == "Convex", strict_convex=k == "StrictConvex",
            concave=k == "Concave", strict_concave=k == "StrictConcave",
            strict_up=k == "StrictUp", strict_down=k == "StrictDown",
            der=((">=", 0),) if k == "Up" else ((("<=", 0),) if k == "Down" else ()),
        )
    return None


class _UF:
    def __init__(self):
        self.p = {}

    def find(self, x):
        self.p.setdefault(x, x)
        while self.p[x] != x:
            self.p[x] = self.p[self.p[x]]
            x = self.p[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.p[max(ra, rb, key=str)] = min(ra, rb, key=str)


def build_model(ctx, witness: Mapping[str, Fraction], conjunct: Conjunct,
                max_rounds: int = 20, samples: int = DEFAULT_SAMPLES) -> ExplicitModel:
    """Explicit model for the ordered conjunct behind ``ctx``.

    Numeric values are copied from ``witness``; merged arrangement variables
    get their representative's value. Functions equal on a segment share one
    fitted piece; segments under a strict comparison are kept within a third
    of the smallest breakpoint gap of their chords, tightening until dense
    samples confirm the comparison.
    """
    w = {k: Fraction(v) for k, v in witness.items()}
    numeric = dict(w)
    for a, rep in ctx.aliases:
        if rep in w:
            numeric.setdefault(a, w[rep])

    def value(name):
        if name not in numeric:
            raise ModelConstructionFailure(f"witness misses variable {name}")
        return numeric[name]

    if not ctx.functions:
        return ExplicitModel(numeric, {})
    xs = [value(v) for v in ctx.chain]
    if any(b <= a for a, b in zip(xs, xs[1:])):
        raise ModelConstructionFailure("chain values are not strictly increasing")
    r = len(xs)
    fns = ctx.functions
    Y = {f: [value(ctx.y(f, j)) for j in range(1, r + 1)] for f in fns}
    T = {f: [value(ctx.t(f, j)) for j in range(1, r + 1)] for f in fns}
    G = {f: (value(ctx.asymptotes[f][0]), value(ctx.asymptotes[f][1])) for f in fns}
    segs = ["L"] + list(range(r - 1)) + ["R"]

    uf = _UF()
    reqs: dict = {}
    dev: dict = {}
    gts = []
    for lit in conjunct.literals:
        if isinstance(lit, FunEqL) and lit.positive:
            for s in _covered(lit, ctx):
                uf.union((lit.f, s), (lit.g, s))
        elif isinstance(lit, FunGtL) and lit.positive:
            lo, hi = ctx.ind(lit.lo) - 1, ctx.ind(lit.hi) - 1
            if lo > hi:
                continue
            gap = min(Y[lit.f][i] - Y[lit.g][i] for i in range(lo, hi + 1))
            if gap <= 0:
                raise ModelConstructionFailure(f"non-positive breakpoint gap for {lit}")
            gts.append((lit, lo, hi))
            for s in range(lo, hi):
                for f in (lit.f, lit.g):
                    dev[(f, s)] = min(dev.get((f, s), math.inf), float(gap) / 3)
        else:
            req = _req_of(lit, value) if getattr(lit, "positive", False) else None
            if req is not None:
                for s in _covered(lit, ctx):
                    reqs[(lit.f, s)] = reqs.get((lit.f, s), ShapeRequirements()).merge(req)

    classes: dict = {}
    for f in fns:
        for s in segs:
            classes.setdefault(uf.find((f, s)), []).append((f, s))

    def fit_all(scale):
        pieces = {}
        for root, members in classes.items():
            req = ShapeRequirements()
            md = math.inf
            for m in members:
                req = req.merge(reqs.get(m, ShapeRequirements()))
                md = min(md, dev.get(m, math.inf) * scale)
            f, s = root
            try:
                if s == "L":
                    p = fit_tail("left", xs[0], Y[f][0], T[f][0], G[f][0], req)
                elif s == "R":
                    p = fit_tail("right", xs[-1], Y[f][-1], T[f][-1], G[f][1], req)
                else:
                    p = fit_segment(xs[s], xs[s + 1], Y[f][s], Y[f][s + 1], T[f][s], T[f][s + 1], req, md)
            except (InfeasibleSegment, InfeasibleTail) as exc:
                raise ModelConstructionFailure(f"{f} on segment {s}: {exc}") from exc
            for m in members:
                pieces[m] = p
        return {
            f: PiecewiseModel(tuple(xs), tuple(Y[f]), tuple(T[f]), tuple(pieces[(f, s)] for s in segs))
            for f in fns
        }

    scale = 1.0
    for _ in range(max_rounds):
        models = fit_all(scale)
        bad = False
        for lit, lo, hi in gts:
            if lo == hi:
                continue
            m = _min_gap(models[lit.f], models[lit.g], float(xs[lo]), float(xs[hi]), samples)
            if not m > 0:
                bad = True
                break
        if not bad:
            return ExplicitModel(numeric, models)
        scale /= 2
    raise ModelConstructionFailure("strict comparison not confirmed on dense samples")


def _sample_points(F, G, a: float, b: float, n: int) -> list[float]:
    pts = [a + (b - a) * k / n for k in range(n + 1)]
    for M in (F, G):
        if hasattr(M, "knots"):
            pts.extend(x for x in M.knots() if a <= x <= b)
    return sorted(set(pts))


def _min_gap(F, G, a, b, n) -> float:
    return min(float(F.value(x)) - float(G.value(x)) for x in _sample_points(F, G, a, b, n))


# ---------------------------------------------------------------- checking

def _finite_window(F, G, a, b):
    knots = []
    for M in (F, G):
        if M is not None and hasattr(M, "knots"):
            knots.extend(M.knots())
    lo = min(knots, default=0.0) - 10.0
    hi = max(knots, default=0.0) + 10.0
    return (max(a, lo) if math.isinf(a) else a), (min(b, hi) if math.isinf(b) else b)


def _sampled_parts(F, a, b, n):
    a, b = _finite_window(F, None, float(a), float(b))
    xs = [a + (b - a) * k / n for k in range(n + 1)]
    ds = [float(F.derivative(x)) for x in xs]
    return [(x0, x1, d0, d1, True, True) for x0, x1, d0, d1 in zip(xs, xs[1:], ds, ds[1:])]


def _parts(F, a, b, n):
    if hasattr(F, "parts") and isinstance(F, PiecewiseModel):
        return F.parts(a, b)
    if float(a) == float(b):
        d = float(F.derivative(a))
        return [(float(a), float(a), d, d, True, True)]
    return _sampled_parts(F, a, b, n)


def _all(results) -> tuple[Verdict, float]:
    v, m = Verdict.TRUE, math.inf
    for rv, rm in results:
        v = v & rv
        m = min(m, rm)
    return v, m


def _der_check(parts, rel, y, tol):
    res = []
    for x0, x1, d0, d1, at0, at1 in parts:
        for d, at in ((d0, at0), (d1, at1)):
            res.append(compare(d, y, rel if at else _NONSTRICT[rel], tol))
    return _all(res)


def _shape_check(kind, parts, tol):
    res = []
    if kind in ("Up", "StrictUp", "Down", "StrictDown"):
        up = kind.endswith("Up")
        rel = ">=" if up else "<="
        for x0, x1, d0, d1, _, _ in parts:
            res.append(compare(d0, 0, rel, tol))
            res.append(compare(d1, 0, rel, tol))
            if kind.startswith("Strict") and x1 > x0:
                peak = max(d0, d1) if up else -min(d0, d1)
                res.append(compare(peak, 0, ">", tol) if peak != 0 else (Verdict.FALSE, 0.0))
        return _all(res)
    convex = kind.endswith("Convex")
    strict = kind.startswith("Strict")
    for i, (x0, x1, d0, d1, _, _) in enumerate(parts):
        a, b = (d1, d0) if convex else (d0, d1)
        if strict and x1 > x0:
            res.append(compare(a, b, ">", tol) if a != b else (Verdict.FALSE, 0.0))
        else:
            res.append(compare(a, b, ">=", tol))
        if i + 1 < len(parts):
            nxt = parts[i + 1][2]
            res.append(compare(nxt, d1, ">=", tol) if convex else compare(d1, nxt, ">=", tol))
    return _all(res)


def _value_points(F, a, b) -> list:
    """Finite interval ends plus the breakpoints strictly inside, with values."""
    pts = [x for x in (a, b) if not math.isinf(x)]
    if isinstance(F, PiecewiseModel):
        pts += [x for x in F.breakpoints if float(a) < x < float(b)]
    pts = sorted(set(pts), key=float)
    return [(x, F.value(x)) for x in pts]


def _slopes(pts):
    return [(y1 - y0) / (x1 - x0) for (x0, y0), (x1, y1) in zip(pts, pts[1:])]


def _mean_slope_check(F, a, b, rel, y, tol):
    # mean value theorem: every chord slope obeys the derivative bound
    return _all(compare(s, y, rel, tol) for s in _slopes(_value_points(F, a, b)))


def _value_shape_check(F, a, b, kind, tol):
    """Necessary conditions on breakpoint values, independent of the pieces."""
    pts = _value_points(F, a, b)
    strict = kind.startswith("Strict")
    if kind in ("Up", "StrictUp"):
        return _all(compare(y1, y0, ">" if strict else ">=", tol) for (_, y0), (_, y1) in zip(pts, pts[1:]))
    if kind in ("Down", "StrictDown"):
        return _all(compare(y0, y1, ">" if strict else ">=", tol) for (_, y0), (_, y1) in zip(pts, pts[1:]))
    sl = _slopes(pts)
    rel = ">" if strict else ">="
    if kind.endswith("Convex"):
        return _all(compare(s1, s0, rel, tol) for s0, s1 in zip(sl, sl[1:]))
    return _all(compare(s0, s1, rel, tol) for s0, s1 in zip(sl, sl[1:]))


def glue_check(F, tol: float) -> tuple[Verdict, float]:
    """Pieces must agree with the stored breakpoint values and derivatives."""
    if not isinstance(F, PiecewiseModel):
        return Verdict.TRUE, math.inf
    worst = 0.0
    for i, x in enumerate(F._fb):
        scale = max(1.0, abs(float(F.values[i])), abs(float(F.derivs[i])))
        for piece in (F.pieces[i], F.pieces[i + 1]):
            err = max(abs(piece.value(x) - float(F.values[i])), abs(piece.derivative(x) - float(F.derivs[i])))
            worst = max(worst, err / scale)
    return (Verdict.TRUE if worst <= tol else Verdict.FALSE), -worst


def _same_structure(F, G, a, b) -> bool:
    if not (isinstance(F, PiecewiseModel) and isinstance(G, PiecewiseModel)):
        return False
    if F is G:
        return True
    pf, pg = F.pieces_on(a, b), G.pieces_on(a, b)
    if len(pf) != len(pg) or any(p != q for p, q in zip(pf, pg)):
        return False
    fa, fb = float(a), float(b)
    for i, x in enumerate(F._fb):
        if fa <= x <= fb:
            j = G._index.get(F.breakpoints[i])
            if j is None or G.values[j] != F.values[i] or G.derivs[j] != F.derivs[i]:
                return False
    return True


def _check(atom, model: ExplicitModel, tol: float, samples: int) -> tuple[Verdict, float]:
    if isinstance(atom, NumRel):
        return compare(eval_term(atom.left, model), eval_term(atom.right, model), atom.rel, tol)
    s1, s2 = eval_endpoint(atom.lo, model), eval_endpoint(atom.hi, model)
    shape = isinstance(atom, Shape)
    vac, _ = compare(s1, s2, ">=" if shape else ">", tol)
    if vac is Verdict.TRUE:
        return Verdict.TRUE, math.inf
    a, b = (s1, s2) if s1 <= s2 else (s2, s1)
    if isinstance(atom, FunEq):
        F, G = model.function(atom.f), model.function(atom.g)
        if a == b:
            body = compare(F.value(a), G.value(a), "=", tol)
        elif _same_structure(F, G, a, b):
            body = (Verdict.TRUE, 0.0)
        else:
            lo, hi = _finite_window(F, G, float(a), float(b))
            pts = _sample_points(F, G, lo, hi, samples)
            body = _all(compare(F.value(x), G.value(x), "=", tol) for x in pts)
            body = _all([body] + [compare(F.derivative(x), G.derivative(x), "=", tol) for x in (lo, hi)])
    elif isinstance(atom, FunGt):
        F, G = model.function(atom.f), model.function(atom.g)
        if a == b:
            body = compare(F.value(a), G.value(a), ">", tol)
        else:
            pts = _sample_points(F, G, float(a), float(b), samples)
            exact_pts = [x for x in (a, b)]
            vals = [compare(F.value(x), G.value(x), ">", tol) for x in exact_pts]
            vals += [compare(float(F.value(x)), float(G.value(x)), ">", tol) for x in pts]
            body = _all(vals)
    elif isinstance(atom, DerRel):
        F = model.function(atom.f)
        y = eval_term(atom.bound, model)
        if a == b:
            body = compare(F.derivative(a), y, atom.rel, tol)
        else:
            body = _der_check(_parts(F, a, b, samples), atom.rel, float(y), tol)
            body = _all([body, _mean_slope_check(F, a, b, atom.rel, y, tol)])
    elif isinstance(atom, Shape):
        F = model.function(atom.f)
        body = _shape_check(atom.kind, _parts(F, a, b, samples), tol)
        if a != b:
            body = _all([body, _value_shape_check(F, a, b, atom.kind, tol)])
    else:
        raise TypeError(f"not an atom: {atom!r}")
    return vac | body[0], body[1]


def check_atom(atom, model: ExplicitModel, tolerance: float = DEFAULT_TOLERANCE,
               samples: int = DEFAULT_SAMPLES) -> Verdict:
    try:
        return _check(atom, model, tolerance, samples)[0]
    except ZeroDivisionError:
        return Verdict.FALSE


def _formula_check(f, model, tol, samples) -> tuple[Verdict, float]:
    if isinstance(f, Not):
        v, m = _formula_check(f.arg, model, tol, samples)
        return ~v, -m
    if is_atom(f):
        try:
            return _check(f, model, tol, samples)
        except ZeroDivisionError:
            return Verdict.FALSE, -math.inf
    from .semantics import evaluate
    return evaluate(f, model, tol), math.nan


# ---------------------------------------------------------------- certification

@dataclass
class CertificationReport:
    status: str  # 'certified' | 'borderline' | 'failed'
    entries: list = field(default_factory=list)  # (literal text, verdict, margin)
    min_margin: float = math.inf

    @property
    def ok(self) -> bool:
        return self.status == "certified"

    def failures(self) -> list[str]:
        return [t for t, v, _ in self.entries if v is Verdict.FALSE]

    def borderline(self) -> list[str]:
        return [t for t, v, _ in self.entries if v is Verdict.BORDERLINE]

    def __str__(self):
        lines = [f"certification: {self.status} (min margin {self.min_margin:.3g})"]
        for text, v, m in self.entries:
            lines.append(f"  [{v.value:10s}] {text}  margin={m:.3g}")
        return "\n".join(lines)


def certify(conjunct, model: ExplicitModel, tolerance: float = DEFAULT_TOLERANCE,
            samples: int = DEFAULT_SAMPLES) -> CertificationReport:
    """Check every literal (or formula) of ``conjunct`` against ``model``."""
    items = conjunct.literals if isinstance(conjunct, Conjunct) else tuple(conjunct)
    entries = []
    for lit in items:
        formula = lit.to_formula() if hasattr(lit, "to_formula") else lit
        v, m = _formula_check(formula, model, tolerance, samples)
        entries.append((str(lit), v, m))
    if model is not None:
        for name in sorted(model.functional):
            v, m = glue_check(model.functional[name], tolerance)
            entries.append((f"C1 gluing of {name}", v, m))
    verdict = Verdict.all(v for _, v, _ in entries)
    status = {Verdict.TRUE: "certified", Verdict.BORDERLINE: "borderline", Verdict.FALSE: "failed"}[verdict]
    margins = [m for _, _, m in entries if not math.isnan(m)]
    return CertificationReport(status, entries, min(margins, default=math.inf))


# ---------------------------------------------------------------- export

def _num_out(x):
    if isinstance(x, Fraction):
        return str(x)
    return x


def _num_in(x):
    if isinstance(x, str):
        return Fraction(x)
    return float(x)


def _piece_doc(p):
    if isinstance(p, SegmentPiece):
        return {"kind": p.kind, "interval": [p.lo, p.hi], "y_lo": p.y_lo, "knots": [list(k) for k in p.knots]}
    lo, hi = (None, p.v) if p.side == "left" else (p.v, None)
    return {"kind": p.kind, "interval": [lo, hi], "side": p.side, "base": p.y, "slope": p.t,
            "gamma": p.gamma, "rate": p.lam}


def witness_document(model: ExplicitModel) -> dict:
    """JSON-ready description: numeric values (exact as 'p/q') and pieces."""
    fns = {}
    for name, F in sorted(model.functional.items()):
        if not isinstance(F, PiecewiseModel):
            raise TypeError(f"function {name} is not piecewise and cannot be exported")
        fns[name] = {
            "breakpoints": [str(b) for b in F.breakpoints],
            "values": [str(v) for v in F.values],
            "derivatives": [str(d) for d in F.derivs],
            "pieces": [_piece_doc(p) for p in F.pieces],
            "glue_error": max((max(e) for e in F.glue_errors()), default=0.0),
        }
    return {
        "format": WITNESS_FORMAT,
        "numeric": {k: _num_out(v) for k, v in sorted(model.numeric.items())},
        "functions": fns,
    }


def dump_witness(model: ExplicitModel) -> str:
    return json.dumps(witness_document(model), indent=2, sort_keys=False)


def load_witness(text: str) -> ExplicitModel:
    doc = json.loads(text)
    if doc.get("format") != WITNESS_FORMAT:
        raise ValueError(f"unknown witness format {doc.get('format')!r}")
    numeric = {k: _num_in(v) for k, v in doc["numeric"].items()}
    fns = {}
    for name, d in doc["functions"].items():
        pieces = []
        for p in d["pieces"]:
            if p["kind"] == "linear-quadratic":
                pieces.append(SegmentPiece(p["interval"][0], p["interval"][1], p["y_lo"],
                                           tuple(tuple(k) for k in p["knots"])))
            else:
                v = p["interval"][1] if p["side"] == "left" else p["interval"][0]
                pieces.append(TailPiece(p["side"], v, p["base"], p["slope"], p["gamma"], p["rate"]))
        fns[name] = PiecewiseModel(
            tuple(Fraction(b) for b in d["breakpoints"]), tuple(Fraction(v) for v in d["values"]),
            tuple(Fraction(x) for x in d["derivatives"]), tuple(pieces))
    return ExplicitModel(numeric, fns)
