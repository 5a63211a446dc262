"""Outward-rounded interval arithmetic on IEEE doubles.

An Enclosure is a closed interval [lo, hi] certified to contain a real
value.  Every arithmetic operation widens its result outward so that
containment is preserved under rounding.  Exact operations (negation,
scaling by a power of two in the normal range) do not widen.

Library transcendentals (exp, log, exp2) are not guaranteed correctly
rounded; their results are widened by TRANS_ULPS steps per side, which
comfortably covers the <= 1 ulp error of common libm implementations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

_INF = math.inf

TRANS_ULPS = 3


def _down(x: float) -> float:
    return math.nextafter(x, -_INF)


def _up(x: float) -> float:
    return math.nextafter(x, _INF)


def _down_n(x: float, n: int) -> float:
    for _ in range(n):
        x = math.nextafter(x, -_INF)
    return x


def _up_n(x: float, n: int) -> float:
    for _ in range(n):
        x = math.nextafter(x, _INF)
    return x


@dataclass(frozen=True)
class Enclosure:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"invalid enclosure [{self.lo}, {self.hi}]")

    @staticmethod
    def point(x: float) -> "Enclosure":
        return Enclosure(float(x), float(x))

    @staticmethod
    def from_fraction(fr: Fraction) -> "Enclosure":
        f = float(fr)
        if Fraction(f) == fr:
            return Enclosure(f, f)
        # float(Fraction) rounds to nearest, so 1 ulp each way suffices
        return Enclosure(_down(f), _up(f))

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, x) -> bool:
        if isinstance(x, Fraction):
            return Fraction(self.lo) <= x <= Fraction(self.hi)
        return self.lo <= x <= self.hi

    def intersects(self, other: "Enclosure") -> bool:
        return self.lo <= other.hi and other.lo <= self.hi

    def intersects_interval(self, lo, hi) -> bool:
        """Intersection test against an exact interval given as Fractions."""
        return Fraction(self.lo) <= hi and lo <= Fraction(self.hi)

    def hull(self, other: "Enclosure") -> "Enclosure":
        return Enclosure(min(self.lo, other.lo), max(self.hi, other.hi))

    # -- arithmetic --------------------------------------------------------

    def __neg__(self) -> "Enclosure":
        return Enclosure(-self.hi, -self.lo)

    def __add__(self, other) -> "Enclosure":
        other = _coerce(other)
        return Enclosure(_down(self.lo + other.lo), _up(self.hi + other.hi))

    __radd__ = __add__

    def __sub__(self, other) -> "Enclosure":
        other = _coerce(other)
        return Enclosure(_down(self.lo - other.hi), _up(self.hi - other.lo))

    def __rsub__(self, other) -> "Enclosure":
        return _coerce(other) - self

    def __mul__(self, other) -> "Enclosure":
        other = _coerce(other)
        p = (self.lo * other.lo, self.lo * other.hi,
             self.hi * other.lo, self.hi * other.hi)
        return Enclosure(_down(min(p)), _up(max(p)))

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Enclosure":
        other = _coerce(other)
        if other.lo <= 0.0 <= other.hi:
            raise ZeroDivisionError("enclosure divisor straddles zero")
        p = (self.lo / other.lo, self.lo / other.hi,
             self.hi / other.lo, self.hi / other.hi)
        return Enclosure(_down(min(p)), _up(max(p)))

    def __rtruediv__(self, other) -> "Enclosure":
        return _coerce(other) / self

    def scale2(self, k: int) -> "Enclosure":
        """Multiply by 2**k.  Exact while both bounds stay normal."""
        return Enclosure(math.ldexp(self.lo, k), math.ldexp(self.hi, k))

    def pow_int(self, n: int) -> "Enclosure":
        """x**n for a non-negative base, by directed repeated squaring."""
        if self.lo < 0.0:
            raise ValueError("pow_int requires a non-negative enclosure")
        if n == 0:
            return Enclosure(1.0, 1.0)
        rlo, rhi = 1.0, 1.0
        blo, bhi = self.lo, self.hi
        m = n
        while m:
            if m & 1:
                rlo = _down(rlo * blo)
                rhi = _up(rhi * bhi)
            m >>= 1
            if m:
                blo = _down(blo * blo)
                bhi = _up(bhi * bhi)
        return Enclosure(rlo, rhi)

    def exp(self) -> "Enclosure":
        return Enclosure(_down_n(math.exp(self.lo), TRANS_ULPS),
                         _up_n(math.exp(self.hi), TRANS_ULPS))

    def exp2(self) -> "Enclosure":
        return Enclosure(_down_n(2.0 ** self.lo, TRANS_ULPS),
                         _up_n(2.0 ** self.hi, TRANS_ULPS))

    def log(self) -> "Enclosure":
        if self.lo <= 0.0:
            raise ValueError("log of enclosure touching zero")
        return Enclosure(_down_n(math.log(self.lo), TRANS_ULPS),
                         _up_n(math.log(self.hi), TRANS_ULPS))

    def sqrt(self) -> "Enclosure":
        if self.lo < 0.0:
            raise ValueError("sqrt of negative enclosure")
        # math.sqrt is correctly rounded
        return Enclosure(_down(math.sqrt(self.lo)), _up(math.sqrt(self.hi)))

    def __repr__(self):
        return f"Enclosure({self.lo!r}, {self.hi!r})"


def _coerce(x) -> Enclosure:
    if isinstance(x, Enclosure):
        return x
    if isinstance(x, Fraction):
        return Enclosure.from_fraction(x)
    if isinstance(x, int):
        return Enclosure.from_fraction(Fraction(x))
    return Enclosure.point(x)


LOG2 = Enclosure(_down(math.log(2.0)), _up(math.log(2.0)))
PI = Enclosure(_down(math.pi), _up(math.pi))
