"""Reference semantics: three-valued evaluation of formulas in explicit models."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union

from .syntax import (
    And, Apply, BinOp, BOLD_ONE, BOLD_ZERO, Const, Deriv, Infinity, Not, Or, Var,
    is_atom,
)

__all__ = [
    "Verdict", "ExplicitModel", "UnassignedSymbol", "eval_term", "eval_endpoint",
    "compare", "evaluate", "DEFAULT_TOLERANCE",
]

DEFAULT_TOLERANCE = 1e-6

Number = Union[Fraction, float]


class UnassignedSymbol(KeyError):
    pass


class Verdict(enum.Enum):
    TRUE = "true"
    FALSE = "false"
    BORDERLINE = "borderline"

    def __invert__(self):
        if self is Verdict.TRUE:
            return Verdict.FALSE
        if self is Verdict.FALSE:
            return Verdict.TRUE
        return self

    def __and__(self, other):
        if Verdict.FALSE in (self, other):
            return Verdict.FALSE
        if Verdict.BORDERLINE in (self, other):
            return Verdict.BORDERLINE
        return Verdict.TRUE

    def __or__(self, other):
        if Verdict.TRUE in (self, other):
            return Verdict.TRUE
        if Verdict.BORDERLINE in (self, other):
            return Verdict.BORDERLINE
        return Verdict.FALSE

    @staticmethod
    def all(items) -> "Verdict":
        out = Verdict.TRUE
        for v in items:
            out = out & v
            if out is Verdict.FALSE:
                break
        return out

    def __bool__(self):
        raise TypeError("Verdict is three-valued; compare against Verdict.TRUE")


@dataclass
class ExplicitModel:
    """Numeric values plus function interpretations.

    Function interpretations are :class:`rdfsat.witness.PiecewiseModel`
    instances or any object with ``value(x)`` and ``derivative(x)``.
    """
    numeric: dict = field(default_factory=dict)
    functional: dict = field(default_factory=dict)

    def function(self, name: str):
        if name in self.functional:
            return self.functional[name]
        if name in (BOLD_ZERO, BOLD_ONE):
            from .witness import PiecewiseModel
            return PiecewiseModel.constant(0 if name == BOLD_ZERO else 1)
        raise UnassignedSymbol(name)

    def number(self, name: str) -> Number:
        try:
            return self.numeric[name]
        except KeyError:
            raise UnassignedSymbol(name) from None


def eval_term(t, model: ExplicitModel) -> Number:
    """Exact when every ingredient is exact, float otherwise."""
    if isinstance(t, Var):
        return model.number(t.name)
    if isinstance(t, Const):
        return t.value
    if isinstance(t, BinOp):
        a, b = eval_term(t.left, model), eval_term(t.right, model)
        if t.op == "+":
            return a + b
        if t.op == "-":
            return a - b
        if t.op == "*":
            return a * b
        if b == 0:
            raise ZeroDivisionError("division by zero in term")
        return a / b
    if isinstance(t, Apply):
        return model.function(t.fvar).value(eval_term(t.arg, model))
    if isinstance(t, Deriv):
        return model.function(t.fvar).derivative(eval_term(t.arg, model))
    raise TypeError(f"not a term: {t!r}")


def eval_endpoint(e, model: ExplicitModel) -> Number:
    if isinstance(e, Infinity):
        return math.inf if e.sign > 0 else -math.inf
    return eval_term(e, model)


def _exact(x) -> bool:
    return isinstance(x, (Fraction, int))


def compare(a: Number, b: Number, rel: str, tolerance: float = DEFAULT_TOLERANCE) -> tuple[Verdict, float]:
    """Three-valued ``a rel b`` and its signed margin.

    Exact operands decide exactly. Floating operands are borderline when the
    answer would flip under a perturbation of relative size ``tolerance``.
    """
    if rel in ("<", "<="):
        a, b, rel = b, a, {"<": ">", "<=": ">="}[rel]
    if math.isinf(a) or math.isinf(b):
        diff = (a - b) if not (math.isinf(a) and math.isinf(b) and a == b) else 0.0
        exact = True
    else:
        exact = _exact(a) and _exact(b)
        diff = a - b
    if rel == "=":
        margin = -abs(float(diff))
        if diff == 0:
            return Verdict.TRUE, 0.0
        if exact:
            return Verdict.FALSE, margin
        band = tolerance * max(1.0, abs(float(a)), abs(float(b)))
        return (Verdict.BORDERLINE if -margin <= band else Verdict.FALSE), margin
    margin = float(diff)
    if exact:
        ok = diff > 0 if rel == ">" else diff >= 0
        return (Verdict.TRUE if ok else Verdict.FALSE), margin
    band = tolerance * max(1.0, abs(float(a)), abs(float(b)))
    if rel == ">":
        if diff > band:
            return Verdict.TRUE, margin
        if diff < -band:
            return Verdict.FALSE, margin
        return Verdict.BORDERLINE, margin
    if rel == ">=":
        if diff >= 0:
            return Verdict.TRUE, margin
        if diff < -band:
            return Verdict.FALSE, margin
        return Verdict.BORDERLINE, margin
    raise ValueError(f"relation {rel!r}")


def evaluate(formula, model: ExplicitModel, tolerance: float = DEFAULT_TOLERANCE) -> Verdict:
    """Truth value of ``formula`` in ``model`` (three-valued)."""
    if isinstance(formula, Not):
        return ~evaluate(formula.arg, model, tolerance)
    if isinstance(formula, And):
        left = evaluate(formula.left, model, tolerance)
        if left is Verdict.FALSE:
            return left
        return left & evaluate(formula.right, model, tolerance)
    if isinstance(formula, Or):
        left = evaluate(formula.left, model, tolerance)
        if left is Verdict.TRUE:
            return left
        return left | evaluate(formula.right, model, tolerance)
    if is_atom(formula):
        from .witness import check_atom
        return check_atom(formula, model, tolerance)
    raise TypeError(f"not a formula: {formula!r}")
