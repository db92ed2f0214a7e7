"""Text syntax for formulas: a hand-written recursive descent parser and a
printer whose output parses back to the same tree.

Grammar (whitespace-insensitive, ``#`` starts a line comment)::

    formula  := conj { "|" conj }
    conj     := unary { "&" unary }
    unary    := "!" unary | "(" formula ")" | atom
    atom     := term REL term
              | "(" fid ("=" | "!=" | ">") fid ")" interval
              | "(" "D[" fid "]" REL term ")" interval
              | SHAPE "(" fid ")" interval
    interval := "[" endpoint "," endpoint "]"
    endpoint := term | "-inf" | "+inf"
    REL      := "=" | "!=" | ">" | ">=" | "<" | "<="

Function identifiers are plain names or the functional constants ``@0`` and
``@1``. Comparisons without a primitive atom are lowered at parse time:
``a < b`` becomes ``b > a``, ``a >= b`` becomes ``!(b > a)`` and so on.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .syntax import (
    And, Apply, BinOp, Const, Deriv, DerRel, FunEq, FunGt, Infinity, NEG_INF,
    Not, NumRel, Or, POS_INF, SHAPE_KINDS, Shape, SourceSpan, Var, validate,
)

__all__ = ["ParseError", "parse", "parse_file", "format_formula", "format_term"]

RESERVED = set(SHAPE_KINDS) | {"D", "inf"}


class ParseError(SyntaxError):
    def __init__(self, message: str, span: SourceSpan):
        self.span = span
        super().__init__(f"{message} at line {span.line}, column {span.column}")


@dataclass
class Token:
    kind: str  # 'id', 'num', 'fconst', 'op', 'eof'
    text: str
    begin: int
    end: int


_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+|\#[^\n]*)
  | (?P<num>\d+(?:\.\d+)?|\.\d+)
  | (?P<fconst>@[01])
  | (?P<id>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<op>!=|>=|<=|[()\[\],=<>!&|+\-*/])
""", re.VERBOSE)


def _tokenize(text: str) -> list[Token]:
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", _make_span(text, pos, pos + 1))
        if m.lastgroup != "ws":
            out.append(Token(m.lastgroup, m.group(), m.start(), m.end()))
        pos = m.end()
    out.append(Token("eof", "", len(text), len(text)))
    return out


def _make_span(text: str, begin: int, end: int) -> SourceSpan:
    line = text.count("\n", 0, begin) + 1
    col = begin - (text.rfind("\n", 0, begin) + 1) + 1
    return SourceSpan(begin, end, line, col)


class _Backtrack(Exception):
    pass


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    # -- token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        return self.tok.kind in ("op", "id") and self.tok.text == text

    def span_from(self, begin: int) -> SourceSpan:
        end = self.toks[self.i - 1].end if self.i else begin
        return _make_span(self.text, begin, max(begin, end))

    def error(self, msg: str):
        t = self.tok
        found = "end of input" if t.kind == "eof" else repr(t.text)
        raise ParseError(f"{msg}, found {found}", _make_span(self.text, t.begin, t.end))

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.error(f"expected {text!r}")
        t = self.tok
        self.i += 1
        return t

    # -- formulas
    def formula(self):
        begin = self.tok.begin
        left = self.conj()
        while self.at("|"):
            self.i += 1
            left = Or(left, self.conj(), span=self.span_from(begin))
        return left

    def conj(self):
        begin = self.tok.begin
        left = self.unary()
        while self.at("&"):
            self.i += 1
            left = And(left, self.unary(), span=self.span_from(begin))
        return left

    def unary(self):
        begin = self.tok.begin
        if self.at("!"):
            self.i += 1
            return Not(self.unary(), span=self.span_from(begin))
        if self.tok.kind == "id" and self.tok.text in SHAPE_KINDS:
            return self.shape_atom()
        if self.at("("):
            save = self.i
            for attempt in (self.fun_atom, self.paren_formula):
                try:
                    return attempt()
                except (_Backtrack, ParseError):
                    self.i = save
            self.i = save
        return self.num_atom()

    def paren_formula(self):
        self.expect("(")
        f = self.formula()
        self.expect(")")
        # "(x + 1) > y" also starts with a parenthesis; let num_atom have it
        if self.tok.kind == "op" and self.tok.text in ("=", "!=", ">", ">=", "<", "<=", "+", "-", "*", "/"):
            raise _Backtrack()
        return f

    def fid(self) -> str:
        t = self.tok
        if t.kind == "fconst" or (t.kind == "id" and t.text not in RESERVED):
            self.i += 1
            return t.text
        self.error("expected a function identifier")

    def fun_atom(self):
        begin = self.tok.begin
        self.expect("(")
        if self.at("D") and self.peek().text == "[":
            self.i += 2
            f = self.fid()
            self.expect("]")
            rel = self.tok.text
            if rel not in ("=", "!=", ">", ">=", "<", "<="):
                raise _Backtrack()
            self.i += 1
            bound = self.term()
            self.expect(")")
            if not self.at("["):
                raise _Backtrack()
            lo, hi = self.interval()
            span = self.span_from(begin)
            if rel == "!=":
                return Not(DerRel(f, "=", bound, lo, hi, span=span), span=span)
            return DerRel(f, rel, bound, lo, hi, span=span)
        f = self.fid()
        rel = self.tok.text
        if self.tok.kind != "op" or rel not in ("=", "!=", ">"):
            raise _Backtrack()
        self.i += 1
        g = self.fid()
        self.expect(")")
        if not self.at("["):
            raise _Backtrack()
        lo, hi = self.interval()
        span = self.span_from(begin)
        if rel == ">":
            return FunGt(f, g, lo, hi, span=span)
        atom = FunEq(f, g, lo, hi, span=span)
        return Not(atom, span=span) if rel == "!=" else atom

    def shape_atom(self):
        begin = self.tok.begin
        kind = self.tok.text
        self.i += 1
        self.expect("(")
        f = self.fid()
        self.expect(")")
        lo, hi = self.interval()
        return Shape(kind, f, lo, hi, span=self.span_from(begin))

    def interval(self):
        self.expect("[")
        lo = self.endpoint()
        self.expect(",")
        hi = self.endpoint()
        self.expect("]")
        return lo, hi

    def endpoint(self):
        if self.tok.text in ("-", "+") and self.peek().kind == "id" and self.peek().text == "inf":
            sign = self.tok.text
            self.i += 2
            return NEG_INF if sign == "-" else POS_INF
        return self.term()

    def num_atom(self):
        begin = self.tok.begin
        left = self.term()
        rel = self.tok.text
        if self.tok.kind != "op" or rel not in ("=", "!=", ">", ">=", "<", "<="):
            self.error("expected a comparison operator")
        self.i += 1
        right = self.term()
        span = self.span_from(begin)
        if rel == "=":
            return NumRel("=", left, right, span=span)
        if rel == ">":
            return NumRel(">", left, right, span=span)
        if rel == "<":
            return NumRel(">", right, left, span=span)
        if rel == "!=":
            return Not(NumRel("=", left, right, span=span), span=span)
        if rel == ">=":
            return Not(NumRel(">", right, left, span=span), span=span)
        return Not(NumRel(">", left, right, span=span), span=span)  # <=

    # -- terms
    def term(self):
        begin = self.tok.begin
        left = self.product()
        while self.tok.kind == "op" and self.tok.text in ("+", "-"):
            op = self.tok.text
            self.i += 1
            left = BinOp(op, left, self.product(), span=self.span_from(begin))
        return left

    def product(self):
        begin = self.tok.begin
        left = self.factor()
        while self.tok.kind == "op" and self.tok.text in ("*", "/"):
            op = self.tok.text
            self.i += 1
            left = BinOp(op, left, self.factor(), span=self.span_from(begin))
        return left

    def factor(self):
        t = self.tok
        begin = t.begin
        if t.kind == "op" and t.text == "-":
            self.i += 1
            if self.tok.kind == "num":
                value = -Fraction(self.tok.text)
                self.i += 1
                return Const(value, span=self.span_from(begin))
            arg = self.factor()
            return BinOp("-", Const(0), arg, span=self.span_from(begin))
        if t.kind == "num":
            self.i += 1
            return Const(Fraction(t.text), span=self.span_from(begin))
        if t.kind == "op" and t.text == "(":
            self.i += 1
            inner = self.term()
            self.expect(")")
            return inner
        if t.kind == "id" and t.text == "D" and self.peek().text == "[":
            self.i += 2
            f = self.fid()
            self.expect("]")
            self.expect("(")
            arg = self.term()
            self.expect(")")
            return Deriv(f, arg, span=self.span_from(begin))
        if t.kind == "fconst" or (t.kind == "id" and t.text not in RESERVED):
            self.i += 1
            if self.at("("):
                self.i += 1
                arg = self.term()
                self.expect(")")
                return Apply(t.text, arg, span=self.span_from(begin))
            if t.kind == "fconst":
                self.error("functional constant used as a number")
            return Var(t.text, span=self.span_from(begin))
        self.error("expected a term")


def parse(text: str):
    """Parse and validate one formula."""
    p = _Parser(text)
    if p.tok.kind == "eof":
        p.error("empty input")
    f = p.formula()
    if p.tok.kind != "eof":
        p.error("unexpected trailing input")
    return validate(f)


def parse_file(path) -> object:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())


# ---------------------------------------------------------------- printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _format_const(c: Fraction) -> str:
    if c.denominator == 1:
        return str(c.numerator)
    d = c.denominator
    twos = fives = 0
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d != 1:
        # not a terminating decimal; prints as a division node
        return f"({c.numerator}/{c.denominator})"
    digits = max(twos, fives)
    scaled = abs(c.numerator) * 10 ** digits // c.denominator
    sign = "-" if c < 0 else ""
    s = str(scaled).rjust(digits + 1, "0")
    return f"{sign}{s[:-digits]}.{s[-digits:]}"


def format_term(t, parent_prec: int = 0, right: bool = False) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Const):
        return _format_const(t.value)
    if isinstance(t, Apply):
        return f"{t.fvar}({format_term(t.arg)})"
    if isinstance(t, Deriv):
        return f"D[{t.fvar}]({format_term(t.arg)})"
    if isinstance(t, BinOp):
        prec = _PREC[t.op]
        s = f"{format_term(t.left, prec)} {t.op} {format_term(t.right, prec, True)}"
        if prec < parent_prec or (right and prec == parent_prec):
            return f"({s})"
        return s
    if isinstance(t, Infinity):
        return str(t)
    raise TypeError(f"not a term: {t!r}")


def _interval(lo, hi) -> str:
    return f"[{format_term(lo)}, {format_term(hi)}]"


def _format_atom(a) -> str:
    if isinstance(a, NumRel):
        return f"{format_term(a.left)} {a.rel} {format_term(a.right)}"
    if isinstance(a, FunEq):
        return f"({a.f} = {a.g}){_interval(a.lo, a.hi)}"
    if isinstance(a, FunGt):
        return f"({a.f} > {a.g}){_interval(a.lo, a.hi)}"
    if isinstance(a, DerRel):
        return f"(D[{a.f}] {a.rel} {format_term(a.bound)}){_interval(a.lo, a.hi)}"
    if isinstance(a, Shape):
        return f"{a.kind}({a.f}){_interval(a.lo, a.hi)}"
    raise TypeError(f"not an atom: {a!r}")


def format_formula(f, _prec: int = 0) -> str:
    """Canonical text for ``f``; ``parse(format_formula(f)) == f``."""
    if isinstance(f, Or):
        s = f"{format_formula(f.left, 1)} | {format_formula(f.right, 2)}"
        return f"({s})" if _prec > 1 else s
    if isinstance(f, And):
        s = f"{format_formula(f.left, 2)} & {format_formula(f.right, 3)}"
        return f"({s})" if _prec > 2 else s
    if isinstance(f, Not):
        a = f.arg
        if isinstance(a, NumRel):
            if a.rel == "=":
                return f"{format_term(a.left)} != {format_term(a.right)}"
            return f"{format_term(a.left)} <= {format_term(a.right)}"
        if isinstance(a, FunEq):
            return f"({a.f} != {a.g}){_interval(a.lo, a.hi)}"
        if isinstance(a, DerRel) and a.rel == "=":
            return f"(D[{a.f}] != {format_term(a.bound)}){_interval(a.lo, a.hi)}"
        if isinstance(a, (FunGt, DerRel, Shape)):
            return f"!{_format_atom(a)}"
        return f"!({format_formula(a)})"
    return _format_atom(f)
