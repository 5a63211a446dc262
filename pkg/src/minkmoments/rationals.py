"""Exact non-negative rationals, continued fractions, and mediant intervals.

Rationals carry the binary-tree structure used everywhere else: the
Calkin-Wilf child maps a/b -> a/(a+b), (a+b)/b, and the Stern-Brocot
partition obtained by repeated mediant splitting.  All arithmetic is
checked against the unsigned 64-bit bound and raises OverflowError
instead of producing out-of-contract values.

The sentinel 1/0 stands for +infinity.  It is admissible only as the
right endpoint of a partition interval; value-level operations reject it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

from .errors import ResourceLimitError

U64_MAX = 2**64 - 1

GENERATION_LIMIT = 30


class Rational:
    """A fraction num/den in lowest terms, den >= 1, or the sentinel 1/0."""

    __slots__ = ("num", "den")

    def __init__(self, num: int, den: int):
        if num < 0 or den < 0:
            raise ValueError("negative rationals are out of scope")
        if den == 0:
            if num == 0:
                raise ZeroDivisionError("0/0 is not a rational")
            g = num
        else:
            g = math.gcd(num, den)
        num //= g
        den //= g
        if num > U64_MAX or den > U64_MAX:
            raise OverflowError(f"{num}/{den} exceeds the 64-bit bound")
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    def __setattr__(self, *a):
        raise AttributeError("Rational is immutable")

    @property
    def is_infinite(self) -> bool:
        return self.den == 0

    @staticmethod
    def parse(text: str) -> "Rational":
        """Parse 'p/q' or a bare integer 'p'."""
        part = text.strip().split("/")
        if len(part) == 1:
            return Rational(int(part[0]), 1)
        if len(part) == 2:
            return Rational(int(part[0]), int(part[1]))
        raise ValueError(f"malformed rational {text!r}")

    def reciprocal(self) -> "Rational":
        if self.num == 0:
            raise ZeroDivisionError("reciprocal of zero")
        if self.is_infinite:
            raise ValueError("reciprocal of the infinite sentinel")
        return Rational(self.den, self.num)

    def as_fraction(self) -> Fraction:
        if self.is_infinite:
            raise ValueError("the infinite sentinel has no Fraction value")
        return Fraction(self.num, self.den)

    def __float__(self) -> float:
        if self.is_infinite:
            return math.inf
        return self.num / self.den

    def _cmp_key(self, other: "Rational"):
        # cross-multiplication; the sentinel compares greater than all
        return self.num * other.den, other.num * self.den

    def __eq__(self, other):
        if not isinstance(other, Rational):
            return NotImplemented
        return self.num == other.num and self.den == other.den

    def __lt__(self, other):
        a, b = self._cmp_key(other)
        return a < b

    def __le__(self, other):
        a, b = self._cmp_key(other)
        return a <= b

    def __gt__(self, other):
        a, b = self._cmp_key(other)
        return a > b

    def __ge__(self, other):
        a, b = self._cmp_key(other)
        return a >= b

    def __hash__(self):
        return hash((self.num, self.den))

    def __repr__(self):
        return f"Rational({self.num}, {self.den})"

    def __str__(self):
        return f"{self.num}/{self.den}"


ZERO = Rational(0, 1)
ONE = Rational(1, 1)
INFINITY = Rational(1, 0)


@dataclass(frozen=True)
class ContinuedFraction:
    """Canonical finite continued fraction [a0; a1, ..., ar].

    a0 >= 0, every later term >= 1, and the last term >= 2 whenever the
    expansion has more than one term, so each rational has exactly one
    representation.
    """

    terms: tuple[int, ...]

    def __post_init__(self):
        t = self.terms
        if not t:
            raise ValueError("continued fraction needs at least one term")
        if t[0] < 0 or any(a < 1 for a in t[1:]):
            raise ValueError(f"non-canonical terms {t}")
        if len(t) > 1 and t[-1] < 2:
            raise ValueError(f"non-canonical final term in {t}")

    def term_sum(self) -> int:
        return sum(self.terms)

    def __len__(self):
        return len(self.terms)


def cf_from_rational(x: Rational) -> ContinuedFraction:
    """Euclidean expansion of a finite rational, in canonical form."""
    if x.is_infinite:
        raise ValueError("continued fraction of the infinite sentinel")
    terms = []
    p, q = x.num, x.den
    while q:
        a, p = divmod(p, q)
        terms.append(a)
        p, q = q, p
    # Euclid on lowest terms never ends with a unit term (except [a0] itself)
    return ContinuedFraction(tuple(terms))


def rational_from_cf(cf: ContinuedFraction) -> Rational:
    """Evaluate a canonical continued fraction, checking 64-bit bounds."""
    p, q = cf.terms[-1], 1
    for a in reversed(cf.terms[:-1]):
        p, q = a * p + q, p
        if p > U64_MAX:
            raise OverflowError("continued fraction convergent exceeds 64 bits")
    return Rational(p, q)


def cw_children(x: Rational) -> tuple[Rational, Rational]:
    """Children a/(a+b) and (a+b)/b of a/b in the Calkin-Wilf tree."""
    if x.is_infinite:
        raise ValueError("the infinite sentinel has no children")
    s = x.num + x.den
    if s > U64_MAX:
        raise OverflowError("child denominator exceeds 64 bits")
    return Rational(x.num, s), Rational(s, x.den)


def cw_generation(n: int, limit: int = GENERATION_LIMIT) -> Iterator[Rational]:
    """Yield the 2**(n-1) fractions of generation n, depth first, left to right.

    Generation n consists exactly of the rationals whose continued
    fraction terms sum to n.
    """
    if n < 1:
        raise ValueError("generation index must be >= 1")
    if n > limit:
        raise ResourceLimitError(f"generation {n} exceeds limit {limit}")
    # iterative DFS; stack holds (num, den, levels_to_go)
    stack = [(1, 1, n - 1)]
    while stack:
        a, b, lv = stack.pop()
        if lv == 0:
            yield Rational(a, b)
            continue
        s = a + b
        if s > U64_MAX:
            raise OverflowError("tree entry exceeds 64 bits")
        # push right child first so the left subtree is emitted first
        stack.append((s, b, lv - 1))
        stack.append((a, s, lv - 1))


def mediant(a: Rational, b: Rational) -> Rational:
    n, d = a.num + b.num, a.den + b.den
    if n > U64_MAX or d > U64_MAX:
        raise OverflowError("mediant exceeds 64 bits")
    return Rational(n, d)


@dataclass(frozen=True)
class SternBrocotInterval:
    """A node of the mediant partition of [0, oo].

    Endpoints are unimodular (|ln*rd - rn*ld| = 1), the right endpoint may
    be the 1/0 sentinel, and the node at depth d carries exact measure
    2**-d under the question-mark distribution.
    """

    left: Rational
    right: Rational
    depth: int

    def __post_init__(self):
        det = self.left.num * self.right.den - self.right.num * self.left.den
        if abs(det) != 1:
            raise ValueError(f"endpoints {self.left}, {self.right} not unimodular")
        if self.left >= self.right:
            raise ValueError("interval endpoints out of order")
        if self.depth < 0:
            raise ValueError("negative depth")

    def mediant(self) -> Rational:
        return mediant(self.left, self.right)

    def contains_strictly(self, x: Rational) -> bool:
        return self.left < x < self.right


def sb_root() -> SternBrocotInterval:
    return SternBrocotInterval(ZERO, INFINITY, 0)


def sb_unit() -> SternBrocotInterval:
    """The [0, 1] node (left child of the root, depth 1)."""
    return SternBrocotInterval(ZERO, ONE, 1)


def sb_refine(iv: SternBrocotInterval) -> tuple[SternBrocotInterval, SternBrocotInterval]:
    """Split an interval at its mediant into its two children."""
    m = iv.mediant()
    d = iv.depth + 1
    return (SternBrocotInterval(iv.left, m, d),
            SternBrocotInterval(m, iv.right, d))
