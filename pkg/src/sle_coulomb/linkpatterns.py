"""Planar (n, m) link patterns: m non-crossing arcs, n - 2m rays to u."""

from __future__ import annotations

import re
from dataclasses import dataclass
from math import comb

from .errors import DomainError


@dataclass(frozen=True, order=True)
class LinkPattern:
    """Arcs are 1-based index pairs (i, j), i < j, sorted by left endpoint."""

    n: int
    m: int
    arcs: tuple
    rays: tuple

    def __post_init__(self):
        arcs = tuple(sorted((int(i), int(j)) for i, j in self.arcs))
        object.__setattr__(self, "arcs", arcs)
        object.__setattr__(self, "rays", tuple(sorted(int(r) for r in self.rays)))
        _validate(self)

    @classmethod
    def from_arcs(cls, n: int, arcs) -> "LinkPattern":
        arcs = tuple(tuple(a) for a in arcs)
        used = {i for a in arcs for i in a}
        return cls(n, len(arcs), arcs, tuple(i for i in range(1, n + 1) if i not in used))

    def depth(self, arc) -> int:
        """Number of arcs strictly enclosing ``arc``."""
        i, j = arc
        return sum(1 for k, l in self.arcs if k < i and j < l)

    def to_text(self) -> str:
        arcs = "".join(f"({i},{j})" for i, j in self.arcs) or "-"
        rays = ",".join(str(r) for r in self.rays) or "-"
        return f"n={self.n} m={self.m} arcs={arcs} rays={rays}"

    __str__ = to_text

    @classmethod
    def from_text(cls, text: str) -> "LinkPattern":
        match = re.fullmatch(r"\s*n=(\d+)\s+m=(\d+)\s+arcs=(\S+)\s+rays=(\S+)\s*", text)
        if not match:
            raise DomainError(f"cannot parse link pattern {text!r}")
        n, m = int(match[1]), int(match[2])
        arcs = [] if match[3] == "-" else [tuple(map(int, p)) for p in re.findall(r"\((\d+),(\d+)\)", match[3])]
        rays = [] if match[4] == "-" else [int(r) for r in match[4].split(",")]
        return cls(n, m, tuple(arcs), tuple(rays))


def parse_arcs(text: str, n: int) -> LinkPattern:
    """Build a pattern from a bare arc list such as ``"(1,4)(2,3)"``."""
    arcs = [tuple(map(int, p)) for p in re.findall(r"\(\s*(\d+)\s*,\s*(\d+)\s*\)", text)]
    return LinkPattern.from_arcs(n, arcs)


def _validate(p: LinkPattern) -> None:
    if len(p.arcs) != p.m:
        raise DomainError(f"expected {p.m} arcs, got {len(p.arcs)}")
    if len(p.rays) != p.n - 2 * p.m:
        raise DomainError(f"expected {p.n - 2 * p.m} rays, got {len(p.rays)}")
    seen = [i for a in p.arcs for i in a] + list(p.rays)
    if sorted(seen) != list(range(1, p.n + 1)):
        raise DomainError(f"arcs and rays must partition 1..{p.n}: {p.arcs} {p.rays}")
    for i, j in p.arcs:
        if not i < j:
            raise DomainError(f"arc ({i},{j}) must have i < j")
        if any(i < r < j for r in p.rays):
            raise DomainError(f"ray inside arc ({i},{j})")
    for i, j in p.arcs:
        for k, l in p.arcs:
            if i < k < j < l:
                raise DomainError(f"arcs ({i},{j}) and ({k},{l}) cross")


def enumerate_link_patterns(n: int, m: int) -> list:
    """All planar patterns, sorted lexicographically by their arc lists."""
    if n < 0 or m < 0 or 2 * m > n:
        raise DomainError(f"need 0 <= 2m <= n, got n={n}, m={m}")
    found = []

    def walk(pos, stack, arcs, rays):
        if pos > n:
            if not stack and len(arcs) == m:
                found.append(LinkPattern(n, m, tuple(arcs), tuple(rays)))
            return
        remaining = n - pos + 1
        if len(stack) > remaining:
            return
        opened = len(arcs) + len(stack)
        if not stack and len(rays) < n - 2 * m:
            walk(pos + 1, stack, arcs, rays + [pos])
        if opened < m:
            walk(pos + 1, stack + [pos], arcs, rays)
        if stack:
            walk(pos + 1, stack[:-1], arcs + [(stack[-1], pos)], rays)

    walk(1, [], [], [])
    found.sort(key=lambda p: p.arcs)
    return found


@dataclass(frozen=True)
class PatternCount:
    n: int
    m: int
    enumerated: int
    ballot: int
    upper_difference: int

    def as_row(self) -> str:
        return (f"n={self.n} m={self.m} enumerated={self.enumerated} "
                f"ballot C(n,m)-C(n,m-1)={self.ballot} C(n,m+1)-C(n,m)={self.upper_difference}")


def ballot_number(n: int, m: int) -> int:
    return comb(n, m) - (comb(n, m - 1) if m >= 1 else 0)


def count_link_patterns(n: int, m: int, detailed: bool = False):
    """Number of planar (n, m) patterns, counted by enumeration.

    With ``detailed=True`` returns a PatternCount that also carries the ballot
    number and the value C(n, m+1) - C(n, m) for comparison.
    """
    count = len(enumerate_link_patterns(n, m))
    if not detailed:
        return count
    return PatternCount(n, m, count, ballot_number(n, m), comb(n, m + 1) - comb(n, m))
