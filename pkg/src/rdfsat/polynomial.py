"""Sparse multivariate polynomials with exact rational coefficients."""

from __future__ import annotations

from fractions import Fraction
from typing import Mapping

# A monomial is a sorted tuple of (variable, exponent) pairs; () is the constant.
Monomial = tuple


def _mul_mono(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    exps = dict(a)
    for v, e in b:
        exps[v] = exps.get(v, 0) + e
    return tuple(sorted(exps.items()))


class Poly:
    __slots__ = ("terms", "_hash")

    def __init__(self, terms: Mapping[Monomial, Fraction] | None = None):
        self.terms = {m: Fraction(c) for m, c in (terms or {}).items() if c != 0}
        self._hash = None

    @classmethod
    def var(cls, name: str) -> "Poly":
        return cls({((name, 1),): Fraction(1)})

    @classmethod
    def const(cls, c) -> "Poly":
        return cls({(): Fraction(c)})

    @staticmethod
    def lift(x) -> "Poly":
        if isinstance(x, Poly):
            return x
        if isinstance(x, str):
            return Poly.var(x)
        return Poly.const(x)

    def __add__(self, other):
        other = Poly.lift(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, 0) + c
        return Poly(out)

    __radd__ = __add__

    def __neg__(self):
        return Poly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-Poly.lift(other))

    def __rsub__(self, other):
        return Poly.lift(other) - self

    def __mul__(self, other):
        other = Poly.lift(other)
        out: dict = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = _mul_mono(m1, m2)
                out[m] = out.get(m, 0) + c1 * c2
        return Poly(out)

    __rmul__ = __mul__

    def __eq__(self, other):
        return isinstance(other, Poly) and self.terms == other.terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self.terms.items()))
        return self._hash

    def is_zero(self) -> bool:
        return not self.terms

    def is_const(self) -> bool:
        return all(m == () for m in self.terms)

    def constant(self) -> Fraction:
        return self.terms.get((), Fraction(0))

    def vars(self) -> set[str]:
        return {v for m in self.terms for v, _ in m}

    def degree(self) -> int:
        return max((sum(e for _, e in m) for m in self.terms), default=0)

    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda kv: (-sum(e for _, e in kv[0]), kv[0]))

    def evaluate(self, assignment: Mapping[str, Fraction]) -> Fraction:
        total = Fraction(0)
        for m, c in self.terms.items():
            v = c
            for name, e in m:
                v *= assignment[name] ** e
            total += v
        return total

    def linear_in(self, name: str) -> Fraction | None:
        """Coefficient if ``name`` occurs only in the pure monomial ``name``."""
        coef = None
        for m, c in self.terms.items():
            if any(v == name for v, _ in m):
                if m != ((name, 1),):
                    return None
                coef = c
        return coef

    def without(self, m: Monomial) -> "Poly":
        return Poly({k: c for k, c in self.terms.items() if k != m})

    def to_python(self, index: Mapping[str, int]) -> str:
        """Float expression over an array ``a``."""
        if not self.terms:
            return "0.0"
        parts = []
        for m, c in self.sorted_terms():
            factors = [repr(float(c))]
            for v, e in m:
                factors.extend([f"a[{index[v]}]"] * e)
            parts.append("*".join(factors))
        return "(" + " + ".join(parts) + ")"

    def __str__(self):
        if not self.terms:
            return "0"
        out = []
        for m, c in self.sorted_terms():
            mono = "*".join(v if e == 1 else f"{v}^{e}" for v, e in m)
            if not mono:
                out.append(str(c))
            elif c == 1:
                out.append(mono)
            elif c == -1:
                out.append(f"-{mono}")
            else:
                out.append(f"{c}*{mono}")
        return " + ".join(out).replace("+ -", "- ")

    def __repr__(self):
        return f"Poly({self})"
