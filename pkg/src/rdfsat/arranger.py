"""Weak orders over domain variables and specialization of conjuncts to them."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterator, Sequence

from .normalizer import ConstDef, Conjunct, Eq, Pos, Sum, conjunct_domain_vars

__all__ = [
    "Arrangement", "ArrangementExplosion", "CoverageError", "DEFAULT_ARRANGEMENT_CAP",
    "enumerate_arrangements", "apply_arrangement", "order_facts", "consistent",
    "count_weak_orders",
]

DEFAULT_ARRANGEMENT_CAP = 7


class ArrangementExplosion(RuntimeError):
    pass


class CoverageError(ValueError):
    pass


@dataclass(frozen=True)
class Arrangement:
    """Blocks listed from smallest to largest; variables in a block are equal."""
    blocks: tuple[tuple[str, ...], ...]

    def position(self) -> dict[str, int]:
        return {v: i for i, block in enumerate(self.blocks) for v in block}

    def __str__(self):
        return " < ".join("{" + ", ".join(b) + "}" for b in self.blocks) or "{}"


def count_weak_orders(n: int) -> int:
    """Ordered Bell (Fubini) numbers via the standard recurrence."""
    a = [1]
    for m in range(1, n + 1):
        total = 0
        binom = 1
        for k in range(1, m + 1):
            binom = binom * (m - k + 1) // k
            total += binom * a[m - k]
        a.append(total)
    return a[n]


def enumerate_arrangements(vars: Sequence[str], cap: int = DEFAULT_ARRANGEMENT_CAP) -> Iterator[Arrangement]:
    """Every ordered set partition of ``vars`` exactly once.

    Variables are inserted one at a time; each existing arrangement of the
    prefix is extended by every placement of the new variable, scanning from
    the top block down, either as a new singleton block or merged into a block.
    """
    vars = list(vars)
    if len(set(vars)) != len(vars):
        raise ValueError("duplicate variables")
    if len(vars) > cap:
        raise ArrangementExplosion(f"{len(vars)} domain variables exceed the cap of {cap}")

    def go(i, blocks):
        if i == len(vars):
            yield Arrangement(tuple(tuple(b) for b in blocks))
            return
        v = vars[i]
        k = len(blocks)
        for slot in range(2 * k, -1, -1):
            if slot % 2 == 0:
                pos = slot // 2
                new = blocks[:pos] + [[v]] + blocks[pos:]
            else:
                pos = slot // 2
                new = blocks[:pos] + [blocks[pos] + [v]] + blocks[pos + 1:]
            yield from go(i + 1, new)

    yield from go(0, [])


def order_facts(conjunct: Conjunct, domain: Sequence[str]):
    """Ground order facts between domain variables stated directly by literals.

    Returns ``(less, equal)``: pairs ``(a, b)`` with ``a < b`` and pairs that
    must be equal. Sources are ``b = a + d & d > 0``, ``a = b`` and constant
    definitions.
    """
    dom = set(domain)
    positive = {l.x for l in conjunct.literals if isinstance(l, Pos)}
    consts = {l.x: l.c for l in conjunct.literals if isinstance(l, ConstDef) and l.x in dom}
    less, equal = set(), set()
    for l in conjunct.literals:
        if isinstance(l, Sum) and l.x in dom:
            if l.y in dom and l.w in positive:
                less.add((l.y, l.x))
            if l.w in dom and l.y in positive:
                less.add((l.w, l.x))
        elif isinstance(l, Eq) and l.x in dom and l.y in dom and l.x != l.y:
            equal.add((l.x, l.y))
    items = sorted(consts.items())
    for a, ca in items:
        for b, cb in items:
            if a < b:
                if ca < cb:
                    less.add((a, b))
                elif cb < ca:
                    less.add((b, a))
                else:
                    equal.add((a, b))
    return less, equal


def consistent(arr: Arrangement, facts) -> bool:
    """Cheap pre-filter: False only if ``arr`` contradicts a ground fact."""
    less, equal = facts
    pos = arr.position()
    for a, b in less:
        if a in pos and b in pos and pos[a] >= pos[b]:
            return False
    for a, b in equal:
        if a in pos and b in pos and pos[a] != pos[b]:
            return False
    return True


def apply_arrangement(conjunct: Conjunct, arr: Arrangement) -> Conjunct:
    """Identify variables within blocks and chain the block representatives.

    The representative of a block is its first variable. For consecutive
    representatives ``u < v`` the literals ``v = u + d`` and ``d > 0`` are added
    with a fresh ``d``. Literals are never deleted (up to exact duplicates).
    """
    covered = {v for b in arr.blocks for v in b}
    missing = [v for v in conjunct_domain_vars(conjunct) if v not in covered]
    if missing:
        raise CoverageError(f"arrangement misses domain variables {missing}")
    sub = {v: b[0] for b in arr.blocks for v in b[1:]}
    lits = [l.rename(sub) for l in conjunct.literals]
    reps = [b[0] for b in arr.blocks]
    c = conjunct
    for u, v in zip(reps, reps[1:]):
        (d,), c = c.fresh(1, "d")
        lits.append(Sum(v, u, d))
        lits.append(Pos(d))
    old = {a: sub.get(r, r) for a, r in conjunct.aliases}
    aliases = tuple(sorted({**old, **sub}.items()))
    return replace(c, literals=tuple(dict.fromkeys(lits)), chain=tuple(reps), aliases=aliases)
