"""Exact evaluation of the question mark function and its relatives.

F(x) extends ?(x)/2 to [0, oo): writing x = [a0; a1, ..., ar] as a
canonical continued fraction,

    F(x) = 1 - 2**-a0 + 2**-(a0+a1) - 2**-(a0+a1+a2) + ...

which is an exact dyadic rational, computed here in big-integer
arithmetic.  ?(x) = 2 F(x) on [0, 1].  The 1-periodic companion
Psi(x) = 2**x (1 - F(x)) is evaluated as an enclosure: the dyadic part
is exact and only 2**x needs outward rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import accumulate
from typing import NamedTuple

import numpy as np

from .enclosure import LOG2, Enclosure
from .errors import PrecisionError
from .rationals import Rational, cf_from_rational


@dataclass(frozen=True)
class DyadicRational:
    """numerator / 2**exponent, reduced so numerator is odd or exponent 0."""

    numerator: int
    exponent: int

    def __post_init__(self):
        if self.exponent < 0:
            raise ValueError("negative exponent")
        if self.exponent and self.numerator % 2 == 0:
            n, e = self.numerator, self.exponent
            if n == 0:
                e = 0
            else:
                while e and n % 2 == 0:
                    n //= 2
                    e -= 1
            object.__setattr__(self, "numerator", n)
            object.__setattr__(self, "exponent", e)

    @staticmethod
    def from_int(n: int) -> "DyadicRational":
        return DyadicRational(n, 0)

    def is_zero(self) -> bool:
        return self.numerator == 0

    def _aligned(self, other: "DyadicRational"):
        e = max(self.exponent, other.exponent)
        return (self.numerator << (e - self.exponent),
                other.numerator << (e - other.exponent), e)

    def __add__(self, other: "DyadicRational") -> "DyadicRational":
        a, b, e = self._aligned(other)
        return DyadicRational(a + b, e)

    def __sub__(self, other: "DyadicRational") -> "DyadicRational":
        a, b, e = self._aligned(other)
        return DyadicRational(a - b, e)

    def __neg__(self) -> "DyadicRational":
        return DyadicRational(-self.numerator, self.exponent)

    def scale2(self, k: int) -> "DyadicRational":
        """Multiply by 2**k."""
        if k >= 0:
            return DyadicRational(self.numerator << k, self.exponent)
        return DyadicRational(self.numerator, self.exponent - k)

    def __eq__(self, other):
        if not isinstance(other, DyadicRational):
            return NotImplemented
        return (self.numerator, self.exponent) == (other.numerator, other.exponent)

    def __lt__(self, other):
        a, b, _ = self._aligned(other)
        return a < b

    def __le__(self, other):
        a, b, _ = self._aligned(other)
        return a <= b

    def __hash__(self):
        return hash((self.numerator, self.exponent))

    def as_fraction(self) -> Fraction:
        return Fraction(self.numerator, 1 << self.exponent)

    def to_enclosure(self) -> Enclosure:
        return Enclosure.from_fraction(self.as_fraction())

    def __str__(self):
        if self.exponent == 0:
            return str(self.numerator)
        return f"{self.numerator}/{1 << self.exponent}"


DYADIC_ZERO = DyadicRational(0, 0)
DYADIC_ONE = DyadicRational(1, 0)


def F_exact(x: Rational) -> DyadicRational:
    """Exact F(x) for finite x >= 0 via the alternating dyadic series."""
    if x.is_infinite:
        raise ValueError("F is evaluated at finite rationals only")
    cf = cf_from_rational(x)
    sums = list(accumulate(cf.terms))
    e = sums[-1]
    # F = 1 + sum_k (-1)^(k+1) 2^-S_k, scaled by 2^e to an integer
    num = 1 << e
    sign = -1
    for s in sums:
        num += sign * (1 << (e - s))
        sign = -sign
    return DyadicRational(num, e)


def F_endpoint(x: Rational) -> DyadicRational:
    """F extended to the infinite sentinel by its total mass, F(oo) = 1."""
    if x.is_infinite:
        return DYADIC_ONE
    return F_exact(x)


def qmark_exact(x: Rational) -> DyadicRational:
    """Exact ?(x) = 2 F(x) for x in [0, 1]."""
    if x.is_infinite or x.num > x.den:
        raise ValueError("?(x) is defined on [0, 1]")
    return F_exact(x).scale2(1)


class DistrResiduals(NamedTuple):
    """Exact residuals of the defining functional equations at one point."""

    functional: DyadicRational   # 2F(x) - (F(x-1)+1)  or  2F(x) - F(x/(1-x))
    reflection: DyadicRational   # F(x) + F(1/x) - 1


def verify_distr(x: Rational) -> DistrResiduals:
    """Residuals of the two-branch doubling equation and the reflection law.

    Both are exact dyadic zeros for every rational; returning the computed
    differences (rather than a boolean) keeps the check falsifiable.
    """
    if x.is_infinite:
        raise ValueError("residuals are defined at finite rationals")
    fx2 = F_exact(x).scale2(1)
    if x.num >= x.den:   # x >= 1
        rhs = F_exact(Rational(x.num - x.den, x.den)) + DYADIC_ONE
    else:                # 0 <= x < 1:  2F(x) = F(x/(1-x))
        rhs = F_exact(Rational(x.num, x.den - x.num))
    functional = fx2 - rhs
    if x.num == 0:
        # 1/x is the sentinel; use its measure value F(oo) = 1
        reflection = F_exact(x) + DYADIC_ONE - DYADIC_ONE
    else:
        reflection = F_exact(x) + F_exact(x.reciprocal()) - DYADIC_ONE
    return DistrResiduals(functional, reflection)


def exp2_enclosure(x: Rational) -> Enclosure:
    """Enclosure of 2**x for a finite rational x >= 0."""
    if x.is_infinite:
        raise ValueError("2**x needs finite x")
    if x.den == 1 and x.num <= 1023:
        return Enclosure.point(math.ldexp(1.0, x.num))
    xe = Enclosure.from_fraction(x.as_fraction())
    return (xe * LOG2).exp()


def psi(x: Rational, target_width: float = 1e-12) -> Enclosure:
    """Enclosure of Psi(x) = 2**x (1 - F(x)) of width <= target_width."""
    if x.is_infinite:
        raise ValueError("Psi is evaluated at finite rationals")
    one_minus_f = (DYADIC_ONE - F_exact(x)).to_enclosure()
    if x.den == 1 and x.num <= 1023:
        out = one_minus_f.scale2(x.num)   # 2**n (1 - F(n)) is exact
    else:
        out = exp2_enclosure(x) * one_minus_f
    if out.width > target_width:
        raise PrecisionError(
            f"Psi enclosure width {out.width:.3g} exceeds target {target_width:.3g}")
    return out


def interval_mass(left: Rational, right: Rational) -> DyadicRational:
    """Exact F-measure F(right) - F(left); the right end may be the sentinel."""
    return F_endpoint(right) - F_endpoint(left)


# -- fast float evaluation on arrays ----------------------------------------

def F_values_float(nums, dens) -> tuple[np.ndarray, float]:
    """F at many rationals in one pass of vectorised Euclidean division.

    Returns (values, err) where every |value - F| <= err.  Each series
    term 2**-S is an exact power of two in double precision (or a clean
    underflow to zero), so the only error is the accumulated addition
    rounding, bounded by the term count.
    """
    num = np.ascontiguousarray(nums, dtype=np.int64).copy()
    den = np.ascontiguousarray(dens, dtype=np.int64).copy()
    if num.shape != den.shape:
        raise ValueError("shape mismatch")
    if np.any(den <= 0) or np.any(num < 0):
        raise ValueError("need finite non-negative rationals")
    val = np.ones(num.shape, dtype=np.float64)
    s = np.zeros(num.shape, dtype=np.float64)
    sgn = np.full(num.shape, -1.0)
    idx = np.arange(num.size)
    num = num.ravel()
    den = den.ravel()
    s_flat = s.ravel()
    val_flat = val.ravel()
    terms = 0
    with np.errstate(under="ignore"):
        while idx.size:
            q, r = np.divmod(num, den)
            s_cur = s_flat[idx] + q
            s_flat[idx] = s_cur
            val_flat[idx] += sgn * np.exp2(-s_cur)
            terms += 1
            keep = r > 0
            num = den[keep]
            den = r[keep]
            idx = idx[keep]
            sgn = -sgn[keep]
    err = (terms + 2) * 2.0**-52
    return val, err


def psi_values_float(nums, dens) -> tuple[np.ndarray, float]:
    """Psi at many rationals; non-certified fast path with an error bound."""
    num = np.ascontiguousarray(nums, dtype=np.int64)
    den = np.ascontiguousarray(dens, dtype=np.int64)
    f, f_err = F_values_float(num, den)
    x = num / den
    p = np.exp2(x)   # callers keep x modest, so 2**x stays well scaled
    vals = p * (1.0 - f)
    err = float(np.max(p)) * (f_err + 3 * 2.0**-52)
    return vals, err
