"""Exactness checks for F, ?, Psi and the defining functional equations.

The independent oracle `f_oracle` evaluates F through the doubling
recursion 2F(x) = F(x-1)+1 (x>=1), 2F(x) = F(x/(1-x)) (x<1) in Fraction
arithmetic, never touching the series code under test.
"""

import random
from fractions import Fraction

import pytest

from minkmoments.errors import PrecisionError
from minkmoments.qfunc import (
    DYADIC_ONE,
    DyadicRational,
    F_endpoint,
    F_exact,
    F_values_float,
    interval_mass,
    psi,
    psi_values_float,
    qmark_exact,
    verify_distr,
)
from minkmoments.rationals import INFINITY, Rational, sb_refine, sb_root

from conftest import random_rational


def f_oracle(p: int, q: int) -> Fraction:
    """F via the doubling recursion; terminates by Euclidean descent."""
    if p == 0:
        return Fraction(0)
    if p >= q:
        return (f_oracle(p - q, q) + 1) / 2
    return f_oracle(p, q - p) / 2


class TestDyadicRational:
    def test_reduction(self):
        d = DyadicRational(4, 3)
        assert (d.numerator, d.exponent) == (1, 1)
        assert DyadicRational(0, 7) == DyadicRational(0, 0)

    def test_arithmetic(self):
        half = DyadicRational(1, 1)
        three_quarter = DyadicRational(3, 2)
        assert (half + three_quarter).as_fraction() == Fraction(5, 4)
        assert (three_quarter - half).as_fraction() == Fraction(1, 4)
        assert half.scale2(1) == DYADIC_ONE
        assert half < three_quarter

    def test_enclosure_exact(self):
        e = DyadicRational(3, 2).to_enclosure()
        assert e.lo == e.hi == 0.75


class TestExactValues:
    def test_qmark_hand_values(self):
        assert qmark_exact(Rational(1, 2)).as_fraction() == Fraction(1, 2)
        assert qmark_exact(Rational(1, 3)).as_fraction() == Fraction(1, 4)
        assert qmark_exact(Rational(2, 3)).as_fraction() == Fraction(3, 4)
        assert qmark_exact(Rational(0, 1)).is_zero()
        assert qmark_exact(Rational(1, 1)).as_fraction() == 1

    def test_F_integers(self):
        assert F_exact(Rational(1, 1)).as_fraction() == Fraction(1, 2)
        assert F_exact(Rational(2, 1)).as_fraction() == Fraction(3, 4)
        for n in (3, 10, 40):
            assert F_exact(Rational(n, 1)).as_fraction() == 1 - Fraction(1, 2**n)

    def test_F_matches_recursion_oracle(self, rng):
        for _ in range(300):
            x = random_rational(rng, 500, 500)
            assert F_exact(x).as_fraction() == f_oracle(x.num, x.den)

    def test_exponent_bounded_by_term_sum(self, rng):
        from minkmoments.rationals import cf_from_rational
        for _ in range(100):
            x = random_rational(rng, 2000, 2000, positive=True)
            assert F_exact(x).exponent <= cf_from_rational(x).term_sum()

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            F_exact(INFINITY)
        with pytest.raises(ValueError):
            qmark_exact(Rational(3, 2))
        assert F_endpoint(INFINITY) == DYADIC_ONE


class TestFunctionalEquations:
    def test_hand_residuals(self):
        for p, q in ((3, 2), (1, 3), (5, 7)):
            res = verify_distr(Rational(p, q))
            assert res.functional.is_zero()
            assert res.reflection.is_zero()

    def test_random_residuals(self, rng):
        for _ in range(2000):
            x = random_rational(rng)
            res = verify_distr(x)
            assert res.functional.is_zero()
            assert res.reflection.is_zero()

    def test_symmetry_on_unit_interval(self, rng):
        for _ in range(500):
            den = rng.randint(1, 10**4)
            num = rng.randint(0, den)
            a = qmark_exact(Rational(num, den))
            b = qmark_exact(Rational(den - num, den))
            assert (a + b) == DYADIC_ONE

    def test_strict_monotonicity(self, rng):
        for _ in range(500):
            x = random_rational(rng)
            y = random_rational(rng)
            if x == y:
                continue
            if y < x:
                x, y = y, x
            assert F_exact(x) < F_exact(y)


class TestPsi:
    def test_exact_at_integers(self):
        for n in (0, 1, 2, 7):
            e = psi(Rational(n, 1))
            assert e.lo == e.hi == 1.0

    def test_paper_style_bounds(self):
        e = psi(Rational(137, 89))
        assert 0.9 < e.lo and e.hi < 1.2

    def test_bounds_claim_on_dense_samples(self):
        # the 0.9 < Psi < 1.2 claim, checked over all p/q with q <= 120
        for q in range(1, 121):
            for p in range(0, q + 1):
                e = psi(Rational(p, q))
                assert 0.9 < e.lo and e.hi < 1.2, f"Psi({p}/{q}) = {e}"

    def test_periodicity_overlap(self, rng):
        for _ in range(100):
            x = random_rational(rng, 200, 200)
            a = psi(x)
            b = psi(Rational(x.num + x.den, x.den))
            assert a.intersects(b)

    def test_unattainable_width(self):
        with pytest.raises(PrecisionError):
            psi(Rational(1, 3), target_width=1e-18)


class TestMeasure:
    def test_interval_mass_exact(self, rng):
        for _ in range(300):
            iv = sb_root()
            depth = rng.randint(0, 30)
            for _ in range(depth):
                iv = sb_refine(iv)[rng.randint(0, 1)]
            mass = interval_mass(iv.left, iv.right)
            assert mass.as_fraction() == Fraction(1, 2**depth)


class TestFloatArrays:
    def test_matches_exact(self, rng):
        nums, dens, exact = [], [], []
        for _ in range(200):
            x = random_rational(rng, 3000, 3000)
            nums.append(x.num)
            dens.append(x.den)
            exact.append(float(F_exact(x).as_fraction()))
        vals, err = F_values_float(nums, dens)
        assert err < 1e-13
        for v, ex in zip(vals, exact):
            assert abs(v - ex) <= err

    def test_psi_float(self):
        vals, err = psi_values_float([0, 1, 137], [1, 1, 89])
        assert abs(vals[0] - 1.0) <= err
        assert abs(vals[1] - 1.0) <= err
        assert 0.9 < vals[2] < 1.2
