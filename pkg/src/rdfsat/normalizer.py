"""Disjunctive normal form and flat standard normal form (SNF).

A formula is turned into a list of :class:`Conjunct` objects, each a
conjunction of flat literals whose arguments are variables (or +-inf for
interval bounds). Compound terms are named by fresh variables that share a
per-conjunct prefix which never occurs at the start of a source name.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterable, Union

from .syntax import (
    And, Apply, BinOp, Const, Deriv, DerRel, FunEq, FunGt, Infinity, NEG_INF,
    Not, NumRel, Or, POS_INF, Shape, Var, BOLD_ONE, BOLD_ZERO,
    conj, function_vars, is_atom, variables,
)

__all__ = [
    "Sum", "Prod", "Pos", "ConstDef", "Eq", "Neq", "App", "DApp",
    "FunEqL", "FunGtL", "DerRelL", "ShapeL", "Literal", "Conjunct",
    "BranchExplosion", "DEFAULT_BRANCH_CAP", "to_dnf", "rewrite_equivalences",
    "to_snf", "normalize", "normalize_branch", "extend", "renormalize",
    "is_snf", "conjunct_domain_vars", "desugar_constants", "conjunct_to_formula",
    "literal_to_formula", "FUNCTIONAL_LITERALS",
]

DEFAULT_BRANCH_CAP = 10_000


class BranchExplosion(RuntimeError):
    pass


# ---------------------------------------------------------------- literals

def _ep(e):
    return e if isinstance(e, Infinity) else Var(e)


def _rn(m, e):
    return e if isinstance(e, Infinity) else m.get(e, e)


def _ep_str(e) -> str:
    return str(e)


@dataclass(frozen=True)
class Sum:
    """x = y + w"""
    x: str
    y: str
    w: str

    def vars(self):
        return (self.x, self.y, self.w)

    def rename(self, m):
        return Sum(m.get(self.x, self.x), m.get(self.y, self.y), m.get(self.w, self.w))

    def to_formula(self):
        return NumRel("=", Var(self.x), BinOp("+", Var(self.y), Var(self.w)))

    def __str__(self):
        return f"{self.x} = {self.y} + {self.w}"


@dataclass(frozen=True)
class Prod:
    """x = y * w"""
    x: str
    y: str
    w: str

    def vars(self):
        return (self.x, self.y, self.w)

    def rename(self, m):
        return Prod(m.get(self.x, self.x), m.get(self.y, self.y), m.get(self.w, self.w))

    def to_formula(self):
        return NumRel("=", Var(self.x), BinOp("*", Var(self.y), Var(self.w)))

    def __str__(self):
        return f"{self.x} = {self.y} * {self.w}"


@dataclass(frozen=True)
class Pos:
    """x > 0"""
    x: str

    def vars(self):
        return (self.x,)

    def rename(self, m):
        return Pos(m.get(self.x, self.x))

    def to_formula(self):
        return NumRel(">", Var(self.x), Const(0))

    def __str__(self):
        return f"{self.x} > 0"


@dataclass(frozen=True)
class ConstDef:
    x: str
    c: Fraction

    def vars(self):
        return (self.x,)

    def rename(self, m):
        return ConstDef(m.get(self.x, self.x), self.c)

    def to_formula(self):
        return NumRel("=", Var(self.x), Const(self.c))

    def __str__(self):
        return f"{self.x} = {self.c}"


@dataclass(frozen=True)
class Eq:
    x: str
    y: str

    def vars(self):
        return (self.x, self.y)

    def rename(self, m):
        return Eq(m.get(self.x, self.x), m.get(self.y, self.y))

    def to_formula(self):
        return NumRel("=", Var(self.x), Var(self.y))

    def __str__(self):
        return f"{self.x} = {self.y}"


@dataclass(frozen=True)
class Neq:
    x: str
    y: str

    def vars(self):
        return (self.x, self.y)

    def rename(self, m):
        return Neq(m.get(self.x, self.x), m.get(self.y, self.y))

    def to_formula(self):
        return Not(NumRel("=", Var(self.x), Var(self.y)))

    def __str__(self):
        return f"{self.x} != {self.y}"


@dataclass(frozen=True)
class App:
    """y = f(x)"""
    y: str
    f: str
    x: str

    def vars(self):
        return (self.y, self.x)

    def rename(self, m):
        return App(m.get(self.y, self.y), self.f, m.get(self.x, self.x))

    def to_formula(self):
        return NumRel("=", Var(self.y), Apply(self.f, Var(self.x)))

    def __str__(self):
        return f"{self.y} = {self.f}({self.x})"


@dataclass(frozen=True)
class DApp:
    """y = D[f](x)"""
    y: str
    f: str
    x: str

    def vars(self):
        return (self.y, self.x)

    def rename(self, m):
        return DApp(m.get(self.y, self.y), self.f, m.get(self.x, self.x))

    def to_formula(self):
        return NumRel("=", Var(self.y), Deriv(self.f, Var(self.x)))

    def __str__(self):
        return f"{self.y} = D[{self.f}]({self.x})"


def _signed(atom, positive):
    return atom if positive else Not(atom)


def _sign_str(text, positive):
    return text if positive else f"!{text}"


@dataclass(frozen=True)
class FunEqL:
    f: str
    g: str
    lo: Union[str, Infinity]
    hi: Union[str, Infinity]
    positive: bool = True

    def vars(self):
        return tuple(e for e in (self.lo, self.hi) if isinstance(e, str))

    def rename(self, m):
        return replace(self, lo=_rn(m, self.lo), hi=_rn(m, self.hi))

    def to_formula(self):
        return _signed(FunEq(self.f, self.g, _ep(self.lo), _ep(self.hi)), self.positive)

    def __str__(self):
        return _sign_str(f"({self.f} = {self.g})[{self.lo}, {self.hi}]", self.positive)


@dataclass(frozen=True)
class FunGtL:
    f: str
    g: str
    lo: str
    hi: str
    positive: bool = True

    def vars(self):
        return (self.lo, self.hi)

    def rename(self, m):
        return replace(self, lo=_rn(m, self.lo), hi=_rn(m, self.hi))

    def to_formula(self):
        return _signed(FunGt(self.f, self.g, Var(self.lo), Var(self.hi)), self.positive)

    def __str__(self):
        return _sign_str(f"({self.f} > {self.g})[{self.lo}, {self.hi}]", self.positive)


@dataclass(frozen=True)
class DerRelL:
    f: str
    rel: str
    y: str
    lo: Union[str, Infinity]
    hi: Union[str, Infinity]
    positive: bool = True

    def vars(self):
        return tuple(e for e in (self.lo, self.hi) if isinstance(e, str)) + (self.y,)

    def rename(self, m):
        return replace(self, y=m.get(self.y, self.y), lo=_rn(m, self.lo), hi=_rn(m, self.hi))

    def to_formula(self):
        return _signed(DerRel(self.f, self.rel, Var(self.y), _ep(self.lo), _ep(self.hi)), self.positive)

    def __str__(self):
        return _sign_str(f"(D[{self.f}] {self.rel} {self.y})[{self.lo}, {self.hi}]", self.positive)


@dataclass(frozen=True)
class ShapeL:
    kind: str
    f: str
    lo: Union[str, Infinity]
    hi: Union[str, Infinity]
    positive: bool = True

    def vars(self):
        return tuple(e for e in (self.lo, self.hi) if isinstance(e, str))

    def rename(self, m):
        return replace(self, lo=_rn(m, self.lo), hi=_rn(m, self.hi))

    def to_formula(self):
        return _signed(Shape(self.kind, self.f, _ep(self.lo), _ep(self.hi)), self.positive)

    def __str__(self):
        return _sign_str(f"{self.kind}({self.f})[{self.lo}, {self.hi}]", self.positive)


Literal = Union[Sum, Prod, Pos, ConstDef, Eq, Neq, App, DApp, FunEqL, FunGtL, DerRelL, ShapeL]
FUNCTIONAL_LITERALS = (FunEqL, FunGtL, DerRelL, ShapeL)
ARITH_LITERALS = (Sum, Prod, Pos, ConstDef, Eq)


def literal_functions(lit) -> tuple[str, ...]:
    if isinstance(lit, (FunEqL, FunGtL)):
        return (lit.f, lit.g)
    if isinstance(lit, (DerRelL, ShapeL, App, DApp)):
        return (lit.f,)
    return ()


def literal_to_formula(lit):
    return lit.to_formula()


@dataclass(frozen=True)
class Conjunct:
    """A conjunction of SNF literals plus bookkeeping.

    ``chain`` is set once an arrangement has been applied (the domain variables
    in strictly increasing order); ``aliases`` maps variables merged by an
    arrangement to their block representative.
    """
    literals: tuple = ()
    counter: int = 0
    prefix: str = "_"
    chain: tuple | None = None
    aliases: tuple = ()

    def __iter__(self):
        return iter(self.literals)

    def __len__(self):
        return len(self.literals)

    def variables(self) -> list[str]:
        seen = dict.fromkeys(v for lit in self.literals for v in lit.vars())
        for v in self.chain or ():
            seen.setdefault(v)
        return list(seen)

    def functions(self) -> list[str]:
        return list(dict.fromkeys(f for lit in self.literals for f in literal_functions(lit)))

    def fresh(self, n: int = 1, tag: str = "n") -> tuple[list[str], "Conjunct"]:
        names = [f"{self.prefix}{tag}{self.counter + i}" for i in range(n)]
        return names, replace(self, counter=self.counter + n)

    def with_literals(self, lits: Iterable) -> "Conjunct":
        return replace(self, literals=tuple(dict.fromkeys(lits)))

    def __str__(self):
        return " & ".join(str(l) for l in self.literals) or "true"


def conjunct_to_formula(c: Conjunct):
    if not c.literals:
        return None
    return conj(*(l.to_formula() for l in c.literals))


def conjunct_domain_vars(c: Conjunct) -> list[str]:
    """Function arguments and variable interval endpoints, first occurrence order."""
    out: dict[str, None] = {}
    for lit in c.literals:
        if isinstance(lit, (App, DApp)):
            out.setdefault(lit.x)
        elif isinstance(lit, FUNCTIONAL_LITERALS):
            for e in (lit.lo, lit.hi):
                if isinstance(e, str):
                    out.setdefault(e)
    return list(out)


def is_snf(c: Conjunct) -> bool:
    """Mechanical check of the SNF literal inventory."""
    for lit in c.literals:
        if isinstance(lit, (Sum, Prod)):
            ok = all(isinstance(v, str) for v in lit.vars())
        elif isinstance(lit, (Pos, Eq)):
            ok = all(isinstance(v, str) for v in lit.vars())
        elif isinstance(lit, ConstDef):
            ok = isinstance(lit.x, str) and isinstance(lit.c, Fraction)
        elif isinstance(lit, (App, DApp)):
            ok = isinstance(lit.x, str) and isinstance(lit.y, str)
        elif isinstance(lit, FunGtL):
            ok = isinstance(lit.lo, str) and isinstance(lit.hi, str)
        elif isinstance(lit, (FunEqL, DerRelL, ShapeL)):
            ok = lit.lo != POS_INF and lit.hi != NEG_INF
            if isinstance(lit, ShapeL):
                ok = ok and lit.kind not in ("Up", "Down")
        else:
            ok = False
        if not ok:
            return False
    return True


# ---------------------------------------------------------------- DNF

def _cap_check(n, cap):
    if n > cap:
        raise BranchExplosion(f"more than {cap} branches")


def to_dnf(formula, cap: int = DEFAULT_BRANCH_CAP) -> list[tuple]:
    """Branches of signed atoms ``(atom, positive)`` whose disjunction is
    propositionally equivalent to ``formula``.

    Branches containing an atom with both signs are dropped; duplicate
    literals within a branch and duplicate branches are removed.
    """
    memo: dict = {}

    def go(node, pos):
        key = (node, pos)
        if key in memo:
            return memo[key]
        if isinstance(node, Not):
            res = go(node.arg, not pos)
        elif isinstance(node, (And, Or)):
            left, right = go(node.left, pos), go(node.right, pos)
            if isinstance(node, And) == pos:
                res = []
                seen = set()
                for a, b in itertools.product(left, right):
                    merged = tuple(dict.fromkeys(a + b))
                    lits = set(merged)
                    if any((atom, not p) in lits for atom, p in merged):
                        continue
                    k = frozenset(merged)
                    if k in seen:
                        continue
                    seen.add(k)
                    res.append(merged)
                    _cap_check(len(res), cap)
            else:
                res = []
                seen = set()
                for b in left + right:
                    k = frozenset(b)
                    if k not in seen:
                        seen.add(k)
                        res.append(b)
                _cap_check(len(res), cap)
        elif is_atom(node):
            res = [((node, pos),)]
        else:
            raise TypeError(f"not a formula: {node!r}")
        memo[key] = res
        return res

    return go(formula, True)


# ---------------------------------------------------------------- rewriting

def _rewrite_atom(atom, pos):
    """Return a replacement formula or None when no rule applies."""
    if isinstance(atom, NumRel):
        t1, t2 = atom.left, atom.right
        if atom.rel == "=" and pos:
            if not isinstance(t2, BinOp) and isinstance(t1, BinOp) and t1.op in "-/":
                t1, t2 = t2, t1
            if isinstance(t2, BinOp) and t2.op == "-":
                # t1 = a - b  ==>  a = t1 + b
                return NumRel("=", t2.left, BinOp("+", t1, t2.right))
            if isinstance(t2, BinOp) and t2.op == "/":
                # t1 = a / b  ==>  b != 0  &  a = t1 * b
                return And(Not(NumRel("=", t2.right, Const(0))),
                           NumRel("=", t2.left, BinOp("*", t1, t2.right)))
            return None
        if atom.rel == "=" and not pos:
            return Or(NumRel(">", t2, t1), NumRel(">", t1, t2))
        if atom.rel == ">" and not pos:
            return Or(NumRel("=", t1, t2), NumRel(">", t2, t1))
        return None
    if isinstance(atom, Shape) and atom.kind in ("Up", "Down"):
        rel = ">=" if atom.kind == "Up" else "<="
        new = DerRel(atom.f, rel, Const(0), atom.lo, atom.hi)
        if isinstance(atom.lo, Infinity) or isinstance(atom.hi, Infinity):
            return new if pos else Not(new)
        # a point interval is vacuous for the shape atom but not for the
        # derivative bound, so that case is split off explicitly
        same = NumRel("=", atom.lo, atom.hi)
        return Or(new, same) if pos else And(Not(new), Not(same))
    return None


def rewrite_equivalences(branch, cap: int = DEFAULT_BRANCH_CAP) -> list[tuple]:
    """Apply the arithmetic and monotonicity equivalences to a fixpoint.

    Rewrites with disjunctive right-hand sides go back through :func:`to_dnf`.
    """
    parts = []
    changed = False
    for atom, pos in branch:
        new = _rewrite_atom(atom, pos)
        if new is None:
            parts.append(atom if pos else Not(atom))
        else:
            changed = True
            parts.append(new)
    if not changed:
        return [tuple(branch)]
    if not parts:
        return [()]
    out = []
    seen = set()
    for br in to_dnf(conj(*parts), cap):
        for rb in rewrite_equivalences(br, cap):
            k = frozenset(rb)
            if k not in seen:
                seen.add(k)
                out.append(rb)
                _cap_check(len(out), cap)
    return out


# ---------------------------------------------------------------- SNF

def _choose_prefix(names: Iterable[str]) -> str:
    names = list(names)
    prefix = "_"
    while any(n.startswith(prefix) for n in names):
        prefix += "_"
    return prefix


class _Builder:
    def __init__(self, base: Conjunct):
        self.base = base
        self.lits: dict = dict.fromkeys(base.literals)
        self.counter = base.counter
        self.prefix = base.prefix
        self.pending: list[list[list]] = []
        self.memo: dict = {}
        for lit in base.literals:
            if isinstance(lit, ConstDef):
                self.memo.setdefault(Const(lit.c), lit.x)

    def fresh(self) -> str:
        name = f"{self.prefix}n{self.counter}"
        self.counter += 1
        return name

    def add(self, lit):
        self.lits.setdefault(lit)

    def flatten(self, t) -> str:
        if isinstance(t, Var):
            return t.name
        if t in self.memo:
            return self.memo[t]
        u = self.fresh()
        self.memo[t] = u
        self.flatten_into(u, t)
        return u

    def nonzero(self, b: str):
        """Record the disjunction b > 0 | 0 > b."""
        z = self.flatten(Const(0))
        v = self.fresh()
        self.pending.append([[Pos(b)], [Sum(z, b, v), Pos(v)]])

    def flatten_into(self, target: str, t):
        if isinstance(t, Var):
            self.add(Eq(target, t.name))
        elif isinstance(t, Const):
            self.add(ConstDef(target, t.value))
        elif isinstance(t, BinOp):
            a, b = self.flatten(t.left), self.flatten(t.right)
            if t.op == "+":
                self.add(Sum(target, a, b))
            elif t.op == "-":
                self.add(Sum(a, target, b))
            elif t.op == "*":
                self.add(Prod(target, a, b))
            else:
                self.nonzero(b)
                self.add(Prod(a, target, b))
        elif isinstance(t, Apply):
            self.add(App(target, t.fvar, self.flatten(t.arg)))
        elif isinstance(t, Deriv):
            self.add(DApp(target, t.fvar, self.flatten(t.arg)))
        else:
            raise TypeError(f"not a term: {t!r}")

    def endpoint(self, e):
        return e if isinstance(e, Infinity) else self.flatten(e)

    def atom(self, atom, pos):
        if isinstance(atom, NumRel):
            if not pos:
                raise ValueError("negated numeric atom: run rewrite_equivalences first")
            if atom.rel == "=":
                if isinstance(atom.left, Var):
                    self.flatten_into(atom.left.name, atom.right)
                elif isinstance(atom.right, Var):
                    self.flatten_into(atom.right.name, atom.left)
                else:
                    self.flatten_into(self.flatten(atom.left), atom.right)
            else:
                if atom.right == Const(0):
                    self.add(Pos(self.flatten(atom.left)))
                else:
                    a, b = self.flatten(atom.left), self.flatten(atom.right)
                    v = self.fresh()
                    self.add(Sum(a, b, v))
                    self.add(Pos(v))
        elif isinstance(atom, FunEq):
            self.add(FunEqL(atom.f, atom.g, self.endpoint(atom.lo), self.endpoint(atom.hi), pos))
        elif isinstance(atom, FunGt):
            self.add(FunGtL(atom.f, atom.g, self.flatten(atom.lo), self.flatten(atom.hi), pos))
        elif isinstance(atom, DerRel):
            lo, hi = self.endpoint(atom.lo), self.endpoint(atom.hi)
            self.add(DerRelL(atom.f, atom.rel, self.flatten(atom.bound), lo, hi, pos))
        elif isinstance(atom, Shape):
            if atom.kind in ("Up", "Down"):
                raise ValueError("Up/Down atom: run rewrite_equivalences first")
            self.add(ShapeL(atom.kind, atom.f, self.endpoint(atom.lo), self.endpoint(atom.hi), pos))
        else:
            raise TypeError(f"not an atom: {atom!r}")

    def results(self, cap: int) -> list[Conjunct]:
        base = list(self.lits)
        out = []
        combos = itertools.product(*self.pending) if self.pending else [()]
        for choice in combos:
            lits = list(base)
            for alt in choice:
                lits.extend(alt)
            out.append(replace(self.base, literals=tuple(dict.fromkeys(lits)), counter=self.counter))
            _cap_check(len(out), cap)
        return out


def _branch_names(branch) -> list[str]:
    names = []
    for atom, _ in branch:
        names.extend(variables(atom))
        names.extend(function_vars(atom))
    return names


def to_snf(branch, base: Conjunct | None = None, cap: int = DEFAULT_BRANCH_CAP) -> list[Conjunct]:
    """Flatten a rewrite-free branch into SNF conjuncts.

    Division inside a term contributes a sign split of the divisor, hence a
    list of conjuncts.
    """
    if base is None:
        base = Conjunct(prefix=_choose_prefix(_branch_names(branch)))
    b = _Builder(base)
    for atom, pos in branch:
        b.atom(atom, pos)
    return b.results(cap)


def normalize_branch(branch, base: Conjunct | None = None, cap: int = DEFAULT_BRANCH_CAP) -> list[Conjunct]:
    out = []
    for rb in rewrite_equivalences(branch, cap):
        for c in to_snf(rb, base, cap):
            if c not in out:
                out.append(c)
                _cap_check(len(out), cap)
    return out


def normalize(formula, cap: int = DEFAULT_BRANCH_CAP) -> list[Conjunct]:
    """Formula -> list of SNF conjuncts whose disjunction is equisatisfiable."""
    prefix = _choose_prefix(variables(formula) + function_vars(formula))
    base = Conjunct(prefix=prefix)
    out = []
    for br in to_dnf(formula, cap):
        for c in normalize_branch(br, base, cap):
            if c not in out:
                out.append(c)
                _cap_check(len(out), cap)
    return out


def extend(conjunct: Conjunct, formula, cap: int = DEFAULT_BRANCH_CAP) -> list[Conjunct]:
    """Conjoin an arbitrary formula to an SNF conjunct and renormalize."""
    if formula is None:
        return [conjunct]
    out = []
    for br in to_dnf(formula, cap):
        for c in normalize_branch(br, conjunct, cap):
            if c not in out:
                out.append(c)
    return out


def renormalize(conjunct: Conjunct, cap: int = DEFAULT_BRANCH_CAP) -> list[Conjunct]:
    """Eliminate non-SNF leftovers (``Neq``); identity on SNF conjuncts."""
    neqs = [l for l in conjunct.literals if isinstance(l, Neq)]
    if not neqs:
        return [conjunct]
    rest = conjunct.with_literals(l for l in conjunct.literals if not isinstance(l, Neq))
    return extend(rest, conj(*(l.to_formula() for l in neqs)), cap)


# ---------------------------------------------------------------- constants

def desugar_constants(formula):
    """Replace the functional constants by fresh, pinned function variables.

    ``@0`` becomes ``k`` with ``(D[k] = 0)[-inf, +inf] & k(c) = 0`` for a fresh
    anchor ``c``; ``@1`` likewise with value 1.
    """
    used = [f for f in function_vars(formula) if f in (BOLD_ZERO, BOLD_ONE)]
    if not used:
        return formula
    prefix = _choose_prefix(variables(formula) + function_vars(formula))
    names = {}
    extra = []
    for i, const in enumerate(used):
        k, c = f"{prefix}k{i}", f"{prefix}c{i}"
        names[const] = k
        value = 0 if const == BOLD_ZERO else 1
        extra.append(DerRel(k, "=", Const(0), NEG_INF, POS_INF))
        extra.append(NumRel("=", Apply(k, Var(c)), Const(value)))
    return conj(_rename_functions(formula, names), *extra)


def _rename_functions(node, m):
    def term(t):
        if isinstance(t, BinOp):
            return replace(t, left=term(t.left), right=term(t.right))
        if isinstance(t, (Apply, Deriv)):
            return replace(t, fvar=m.get(t.fvar, t.fvar), arg=term(t.arg))
        return t

    if isinstance(node, Not):
        return replace(node, arg=_rename_functions(node.arg, m))
    if isinstance(node, (And, Or)):
        return replace(node, left=_rename_functions(node.left, m), right=_rename_functions(node.right, m))
    if isinstance(node, NumRel):
        return replace(node, left=term(node.left), right=term(node.right))
    if isinstance(node, (FunEq, FunGt)):
        return replace(node, f=m.get(node.f, node.f), g=m.get(node.g, node.g), lo=term(node.lo), hi=term(node.hi))
    if isinstance(node, DerRel):
        return replace(node, f=m.get(node.f, node.f), bound=term(node.bound), lo=term(node.lo), hi=term(node.hi))
    if isinstance(node, Shape):
        return replace(node, f=m.get(node.f, node.f), lo=term(node.lo), hi=term(node.hi))
    return node
