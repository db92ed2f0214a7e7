"""Abstract syntax of formulas over reals and C1 function variables.

Terms are built from numeric variables, exact rational constants, the four
arithmetic operators, and point evaluations ``f(t)`` / ``D[f](t)`` of
function variables. Atoms compare terms, compare functions on an interval,
bound a derivative on an interval, or state a shape property (monotonicity,
convexity) on an interval. Interval bounds may be ``-inf`` / ``+inf``.

All nodes are frozen dataclasses. Source spans are carried for diagnostics
but excluded from equality, so two formulas parsed from differently spaced
text compare equal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Union

__all__ = [
    "SourceSpan", "Var", "Const", "BinOp", "Apply", "Deriv", "Infinity",
    "NEG_INF", "POS_INF", "BOLD_ZERO", "BOLD_ONE",
    "NumRel", "FunEq", "FunGt", "DerRel", "Shape", "Not", "And", "Or",
    "SHAPE_KINDS", "DER_RELS", "ValidationError", "UnboundedStrictComparison",
    "IllegalEndpoint", "MalformedArity", "NonVariableEndpointAfterSNF",
    "Violation", "validate", "domain_vars", "atoms", "variables",
    "function_vars", "conj", "disj", "is_atom",
]

# Functional constants: the null function and the constant-one function.
BOLD_ZERO = "@0"
BOLD_ONE = "@1"

SHAPE_KINDS = (
    "Up", "StrictUp", "Down", "StrictDown",
    "Convex", "StrictConvex", "Concave", "StrictConcave",
)
DER_RELS = ("=", ">", ">=", "<", "<=")
ARITH_OPS = ("+", "-", "*", "/")


@dataclass(frozen=True)
class SourceSpan:
    begin: int
    end: int
    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"


def _span():
    return field(default=None, compare=False, repr=False)


# ---------------------------------------------------------------- terms

@dataclass(frozen=True)
class Var:
    name: str
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class Const:
    value: Fraction
    span: SourceSpan | None = _span()

    def __post_init__(self):
        if not isinstance(self.value, Fraction):
            object.__setattr__(self, "value", Fraction(self.value))


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Term"
    right: "Term"
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class Apply:
    fvar: str
    arg: "Term"
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class Deriv:
    fvar: str
    arg: "Term"
    span: SourceSpan | None = _span()


Term = Union[Var, Const, BinOp, Apply, Deriv]


@dataclass(frozen=True)
class Infinity:
    sign: int

    def __repr__(self) -> str:
        return "POS_INF" if self.sign > 0 else "NEG_INF"

    def __str__(self) -> str:
        return "+inf" if self.sign > 0 else "-inf"


NEG_INF = Infinity(-1)
POS_INF = Infinity(1)

Endpoint = Union[Term, Infinity]


# ---------------------------------------------------------------- atoms

@dataclass(frozen=True)
class NumRel:
    """``left = right`` or ``left > right``."""
    rel: str
    left: Term
    right: Term
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class FunEq:
    f: str
    g: str
    lo: Endpoint
    hi: Endpoint
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class FunGt:
    f: str
    g: str
    lo: Term
    hi: Term
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class DerRel:
    f: str
    rel: str
    bound: Term
    lo: Endpoint
    hi: Endpoint
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class Shape:
    kind: str
    f: str
    lo: Endpoint
    hi: Endpoint
    span: SourceSpan | None = _span()


Atom = Union[NumRel, FunEq, FunGt, DerRel, Shape]
ATOM_TYPES = (NumRel, FunEq, FunGt, DerRel, Shape)


@dataclass(frozen=True)
class Not:
    arg: "Formula"
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"
    span: SourceSpan | None = _span()


Formula = Union[Atom, Not, And, Or]


def is_atom(node) -> bool:
    return isinstance(node, ATOM_TYPES)


def conj(*parts: Formula) -> Formula:
    """Left-associated conjunction of one or more formulas."""
    if not parts:
        raise ValueError("conj() needs at least one formula")
    out = parts[0]
    for p in parts[1:]:
        out = And(out, p)
    return out


def disj(*parts: Formula) -> Formula:
    if not parts:
        raise ValueError("disj() needs at least one formula")
    out = parts[0]
    for p in parts[1:]:
        out = Or(out, p)
    return out


# ---------------------------------------------------------------- traversal

def atoms(formula: Formula) -> Iterator[Atom]:
    """Atoms in left-to-right order (with repetitions)."""
    stack = [formula]
    while stack:
        node = stack.pop()
        if isinstance(node, Not):
            stack.append(node.arg)
        elif isinstance(node, (And, Or)):
            stack.append(node.right)
            stack.append(node.left)
        else:
            yield node


def _atom_parts(atom: Atom):
    """Yield ('term'|'endpoint'|'bound', value) for every term slot of an atom."""
    if isinstance(atom, NumRel):
        yield "term", atom.left
        yield "term", atom.right
    elif isinstance(atom, DerRel):
        yield "endpoint", atom.lo
        yield "endpoint", atom.hi
        yield "term", atom.bound
    else:
        yield "endpoint", atom.lo
        yield "endpoint", atom.hi


def _atom_functions(atom: Atom) -> tuple[str, ...]:
    if isinstance(atom, (FunEq, FunGt)):
        return (atom.f, atom.g)
    if isinstance(atom, (DerRel, Shape)):
        return (atom.f,)
    return ()


def _term_nodes(term) -> Iterator:
    stack = [term]
    while stack:
        t = stack.pop()
        if isinstance(t, Infinity):
            continue
        yield t
        if isinstance(t, BinOp):
            stack.append(t.right)
            stack.append(t.left)
        elif isinstance(t, (Apply, Deriv)):
            stack.append(t.arg)


def _first_seen(items) -> list:
    seen: dict = {}
    for x in items:
        seen.setdefault(x, None)
    return list(seen)


def variables(formula: Formula) -> list[str]:
    """Numeric variables in order of first occurrence."""
    def gen():
        for atom in atoms(formula):
            for _, t in _atom_parts(atom):
                for node in _term_nodes(t):
                    if isinstance(node, Var):
                        yield node.name
    return _first_seen(gen())


def function_vars(formula: Formula) -> list[str]:
    """Function variables (including functional constants) in first-occurrence order."""
    def gen():
        for atom in atoms(formula):
            yield from _atom_functions(atom)
            for _, t in _atom_parts(atom):
                for node in _term_nodes(t):
                    if isinstance(node, (Apply, Deriv)):
                        yield node.fvar
    return _first_seen(gen())


def domain_vars(formula: Formula, snf: bool = False) -> list[str]:
    """Variables used as function arguments or as bare interval endpoints.

    With ``snf=True`` every endpoint and function argument must already be a
    variable; a compound one raises :class:`NonVariableEndpointAfterSNF`.
    """
    def visit_term(t):
        for node in _term_nodes(t):
            if isinstance(node, (Apply, Deriv)):
                if isinstance(node.arg, Var):
                    yield node.arg.name
                elif snf:
                    raise NonVariableEndpointAfterSNF(
                        [Violation("NonVariableEndpointAfterSNF", (), "compound function argument")])

    def gen():
        for atom in atoms(formula):
            for role, t in _atom_parts(atom):
                if role == "endpoint":
                    if isinstance(t, Var):
                        yield t.name
                    elif snf and not isinstance(t, Infinity):
                        raise NonVariableEndpointAfterSNF(
                            [Violation("NonVariableEndpointAfterSNF", (), "compound interval endpoint")])
                yield from visit_term(t)
    return _first_seen(gen())


# ---------------------------------------------------------------- validation

@dataclass(frozen=True)
class Violation:
    kind: str
    path: tuple[int, ...]
    message: str
    span: SourceSpan | None = None

    def __str__(self) -> str:
        where = f" at {self.span}" if self.span else ""
        path = "/".join(map(str, self.path)) or "root"
        return f"{self.kind}{where} (path {path}): {self.message}"


class ValidationError(ValueError):
    def __init__(self, violations: list[Violation]):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class UnboundedStrictComparison(ValidationError):
    pass


class IllegalEndpoint(ValidationError):
    pass


class MalformedArity(ValidationError):
    pass


class NonVariableEndpointAfterSNF(ValidationError):
    pass


_ERROR_CLASSES = {
    "UnboundedStrictComparison": UnboundedStrictComparison,
    "IllegalEndpoint": IllegalEndpoint,
    "MalformedArity": MalformedArity,
}


def _check_term(t, path, out):
    if isinstance(t, Infinity):
        out.append(Violation("MalformedArity", path, "infinity used as a numerical term"))
    elif isinstance(t, BinOp):
        if t.op not in ARITH_OPS:
            out.append(Violation("MalformedArity", path, f"unknown operator {t.op!r}", t.span))
        _check_term(t.left, path + (0,), out)
        _check_term(t.right, path + (1,), out)
    elif isinstance(t, (Apply, Deriv)):
        if not isinstance(t.fvar, str) or not t.fvar:
            out.append(Violation("MalformedArity", path, "missing function variable", t.span))
        _check_term(t.arg, path + (0,), out)
    elif not isinstance(t, (Var, Const)):
        out.append(Violation("MalformedArity", path, f"not a term: {t!r}"))


def _check_interval(atom, path, out):
    if atom.lo == POS_INF:
        out.append(Violation("IllegalEndpoint", path, "left bound is +inf", atom.span))
    elif not isinstance(atom.lo, Infinity):
        _check_term(atom.lo, path, out)
    if atom.hi == NEG_INF:
        out.append(Violation("IllegalEndpoint", path, "right bound is -inf", atom.span))
    elif not isinstance(atom.hi, Infinity):
        _check_term(atom.hi, path, out)


def _check(node, path, out):
    if isinstance(node, Not):
        _check(node.arg, path + (0,), out)
    elif isinstance(node, (And, Or)):
        _check(node.left, path + (0,), out)
        _check(node.right, path + (1,), out)
    elif isinstance(node, NumRel):
        if node.rel not in ("=", ">"):
            out.append(Violation("MalformedArity", path, f"numeric relation {node.rel!r}", node.span))
        _check_term(node.left, path, out)
        _check_term(node.right, path, out)
    elif isinstance(node, FunGt):
        if isinstance(node.lo, Infinity) or isinstance(node.hi, Infinity):
            out.append(Violation("UnboundedStrictComparison", path,
                                 "function comparison (f > g) needs finite bounds", node.span))
        for t in (node.lo, node.hi):
            if not isinstance(t, Infinity):
                _check_term(t, path, out)
    elif isinstance(node, FunEq):
        _check_interval(node, path, out)
    elif isinstance(node, DerRel):
        if node.rel not in DER_RELS:
            out.append(Violation("MalformedArity", path, f"derivative relation {node.rel!r}", node.span))
        _check_term(node.bound, path, out)
        _check_interval(node, path, out)
    elif isinstance(node, Shape):
        if node.kind not in SHAPE_KINDS:
            out.append(Violation("MalformedArity", path, f"unknown shape {node.kind!r}", node.span))
        _check_interval(node, path, out)
    else:
        out.append(Violation("MalformedArity", path, f"not a formula: {node!r}"))


def validate(formula: Formula) -> Formula:
    """Return ``formula`` unchanged if every atom respects the bound restrictions.

    All violations are collected; the raised exception's class is that of the
    first one and ``.violations`` lists them all.
    """
    out: list[Violation] = []
    _check(formula, (), out)
    if out:
        raise _ERROR_CLASSES.get(out[0].kind, ValidationError)(out)
    return formula
