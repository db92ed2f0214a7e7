from __future__ import annotations

import random
import re
import shutil
from fractions import Fraction as F

import pytest

from rdfgen import planted_conjunct
from rdfsat.normalizer import (
    FUNCTIONAL_LITERALS, App, Conjunct, DApp, DerRelL, Eq, FunEqL, Pos, ShapeL, Sum,
    desugar_constants, is_snf, normalize,
)
from rdfsat.parser import parse
from rdfsat.polynomial import Poly
from rdfsat.reducer import (
    MissingChain, make_context, reduce, reduce_ordered, reduction_paths, step1_remove_negatives,
    step2_explicit_eval, step3_remove_functionals,
)
from rdfsat.syntax import NEG_INF
from rdfsat.tarski import PAnd, PImplies, SolverConfig, emit_exchange, eq, evaluate_exact, le, lt, solve_external

needs_z3 = pytest.mark.skipif(shutil.which("z3") is None, reason="z3 not on PATH")

EXAMPLE1 = ("a < b & f(a) = f(b) & D[f](a) != 0 & D[f](b) != 0 & "
            "((D[f] > 0)[a, b] | (D[f] < 0)[a, b])")
EXAMPLE2 = "(D[f] = t)[a, b] & (!Convex(f)[a, b] | !Concave(f)[a, b])"


@pytest.fixture(autouse=True)
def _no_solver_env(monkeypatch):
    monkeypatch.delenv("RDFSAT_SOLVER", raising=False)


def _negated_functional(c):
    return [l for l in c if isinstance(l, FUNCTIONAL_LITERALS) and not l.positive]


# ----------------------------------------------------------------- step 1

def test_not_strict_up_gadget():
    c = Conjunct((ShapeL("StrictUp", "f", "a", "b", False),), prefix="_")
    out = step1_remove_negatives(c)
    # a <= x1 and x2 <= b each split into = / <, and y1 >= y2 into = / >
    assert len(out) == 8
    for o in out:
        assert not _negated_functional(o)
        assert is_snf(o)
        apps = [l for l in o if isinstance(l, App)]
        assert len(apps) == 2 and {l.f for l in apps} == {"f"}
        x1, x2 = apps[0].x, apps[1].x
        assert any(isinstance(l, Sum) and (l.x, l.y) == (x2, x1) for l in o)


def test_not_convex_three_point_gadget():
    c = Conjunct((ShapeL("Convex", "f", "a", "b", False),), prefix="_")
    out = step1_remove_negatives(c)
    assert len(out) == 4
    for o in out:
        assert len([l for l in o if isinstance(l, App)]) == 3
        assert not _negated_functional(o)


def test_not_fun_eq_with_infinite_left_guard():
    c = Conjunct((FunEqL("f", "g", NEG_INF, "b", False),), prefix="_")
    out = step1_remove_negatives(c)
    # only x <= b is guarded: two ways for <=, two for !=
    assert len(out) == 4
    for o in out:
        assert all("a" not in l.vars() for l in o)


def test_not_der_rel_uses_complement():
    c = Conjunct((DerRelL("f", ">=", "y", "a", "b", False),), prefix="_")
    for o in step1_remove_negatives(c):
        [d] = [l for l in o if isinstance(l, DApp)]
        # y > D[f](x)
        assert any(isinstance(l, Sum) and l.x == "y" and l.y == d.y for l in o)


def test_positive_literals_pass_through():
    c = Conjunct((ShapeL("Convex", "f", "a", "b"),), prefix="_")
    assert step1_remove_negatives(c) == [c]


@pytest.mark.parametrize("seed", range(40))
def test_step1_removes_every_negation(seed):
    c, _ = planted_conjunct(random.Random(seed), negated=True)
    for o in step1_remove_negatives(c):
        assert not _negated_functional(o)
        assert is_snf(o)


# ----------------------------------------------------------------- step 2

def test_step2_samples_and_links():
    c = Conjunct((App("u", "f", "a"), ShapeL("Convex", "f", "a", "b")), prefix="_", chain=("a", "b"))
    ctx = make_context(c)
    out = step2_explicit_eval(c, ctx)
    y1, t1 = ctx.samples[("f", 1)]
    y2, t2 = ctx.samples[("f", 2)]
    lits = set(out.literals)
    assert {App(y1, "f", "a"), DApp(t1, "f", "a"), App(y2, "f", "b"), DApp(t2, "f", "b")} <= lits
    assert Eq("u", y1) in lits


def test_step2_without_functions_is_identity():
    c = Conjunct((Pos("x"),), chain=())
    assert step2_explicit_eval(c, make_context(c)) == c


# ----------------------------------------------------------------- step 3

def _body(c):
    return set(step3_remove_functionals(c, make_context(c)).body)


def test_step3_fun_eq_on_four_chain():
    c = Conjunct((FunEqL("f", "g", "v2", "v3"),), prefix="_", chain=("v1", "v2", "v3", "v4"))
    ctx = make_context(c)
    got = _body(c)
    want = set()
    for j in (2, 3):
        (yf, tf), (yg, tg) = ctx.samples[("f", j)], ctx.samples[("g", j)]
        want |= {eq(Poly.var(yf), Poly.var(yg)), eq(Poly.var(tf), Poly.var(tg))}
    assert got == want


def test_step3_strict_up_left_tail():
    c = Conjunct((ShapeL("StrictUp", "f", NEG_INF, "v1"),), prefix="_", chain=("v1",))
    ctx = make_context(c)
    _, t1 = ctx.samples[("f", 1)]
    g0, _ = ctx.asymptotes["f"]
    assert _body(c) == {le(0, Poly.var(t1)), lt(0, Poly.var(g0))}


def test_step3_der_rel_ge():
    c = Conjunct((DerRelL("f", ">=", "y", "v1", "v2"),), prefix="_", chain=("v1", "v2"))
    ctx = make_context(c)
    (y1, t1), (y2, t2) = ctx.samples[("f", 1)], ctx.samples[("f", 2)]
    Y1, Y2, T1, T2, Y = map(Poly.var, (y1, y2, t1, t2, "y"))
    span = Poly.var("v2") - Poly.var("v1")
    want = {le(Y, T1), le(Y, T2), le(Y * span, Y2 - Y1),
            PImplies(eq(Y2 - Y1, Y * span), PAnd((eq(T1, Y), eq(T2, Y))))}
    assert _body(c) == want


def test_step3_requires_chain():
    with pytest.raises(MissingChain):
        step3_remove_functionals(Conjunct((Pos("x"),)))


def test_empty_conjunct_reduces_to_true():
    formula, ctxs = reduce(Conjunct())
    assert formula.body == () and len(ctxs) == 1
    assert evaluate_exact(formula, {})


def _no_functions_or_division(text):
    assert "f(" not in text and "D[" not in text
    for m in re.finditer(r"\(/ ([^()\s]+) ([^()\s]+)\)", text):
        F(m.group(1)), F(m.group(2))  # constant quotients only
    assert text.count("(/") == len(re.findall(r"\(/ [^()\s]+ [^()\s]+\)", text))


@pytest.mark.parametrize("seed", range(30))
def test_step3_output_is_pure_arithmetic(seed):
    c, _ = planted_conjunct(random.Random(seed), negated=True)
    for p in reduction_paths(c):
        text = emit_exchange(p.formula)
        _no_functions_or_division(text)
        names = set(p.formula.variables)
        ctx_names = {n for pair in p.context.samples.values() for n in pair}
        ctx_names |= {n for pair in p.context.asymptotes.values() for n in pair}
        assert names <= set(p.ordered.variables()) | ctx_names | set(p.context.chain)


def test_reduction_is_deterministic():
    c = normalize(desugar_constants(parse(EXAMPLE2)))[0]
    a = [emit_exchange(p.formula) for p in reduction_paths(c)]
    b = [emit_exchange(p.formula) for p in reduction_paths(c)]
    assert a == b


def test_example1_arrangements_pruned_to_one():
    for c in normalize(desugar_constants(parse(EXAMPLE1))):
        paths = list(reduction_paths(c))
        assert [str(p.arrangement) for p in paths] == ["{a} < {b}"]


def test_example1_positive_branch_contains_expected_constraints():
    c = [c for c in normalize(desugar_constants(parse(EXAMPLE1)))
         if any(isinstance(l, DerRelL) and l.rel == ">" for l in c)][0]
    [p] = list(reduction_paths(c))[:1]
    ctx = p.context
    (y1, t1), (y2, t2) = ctx.samples[("f", 1)], ctx.samples[("f", 2)]
    names = set(p.formula.variables)
    assert {y1, y2, t1, t2} <= names
    text = emit_exchange(p.formula)
    assert f"(= _n1 {y1})" in text or f"(= {y1} _n1)" in text


@needs_z3
@pytest.mark.parametrize("source", [EXAMPLE1, EXAMPLE2])
def test_examples_every_path_unsat(source):
    for c in normalize(desugar_constants(parse(source))):
        for p in reduction_paths(c):
            assert solve_external(p.formula, SolverConfig()).status == "unsat", str(p.arrangement)


@needs_z3
def test_strict_up_sat():
    [c] = normalize(parse("a < b & StrictUp(f)[a, b]"))
    res = [solve_external(p.formula, SolverConfig()) for p in reduction_paths(c)]
    assert any(r.status == "sat" and r.validated for r in res)


def test_ordered_reduction_of_strict_up_has_witness():
    c = Conjunct((ShapeL("StrictUp", "f", "a", "b"), Sum("b", "a", "d"), Pos("d")), prefix="_", chain=("a", "b"))
    formula, ctx = reduce_ordered(c)
    (y1, t1), (y2, t2) = ctx.samples[("f", 1)], ctx.samples[("f", 2)]
    g0, gr = ctx.asymptotes["f"]
    w = {v: F(0) for v in formula.variables}
    w.update({"a": F(0), "b": F(1), "d": F(1), y1: F(0), y2: F(1), t1: F(1), t2: F(1), g0: F(1), gr: F(1)})
    assert evaluate_exact(formula, w)
