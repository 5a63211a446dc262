"""Exact rational / continued fraction / mediant-tree checks.

Claims covered:
  - Euclidean expansion is canonical and inverts exactly (oracle: Fraction
    folding of the terms from the right).
  - Calkin-Wilf children and generations match the classical tree layout;
    generation n has 2**(n-1) distinct members whose CF terms sum to n and
    is closed under x -> 1/x.
  - Mediant refinement preserves unimodularity and tiles the root interval.
  - 64-bit overflow raises instead of wrapping.
"""

import random
from fractions import Fraction

import pytest

from minkmoments.errors import ResourceLimitError
from minkmoments.rationals import (
    INFINITY,
    ONE,
    ZERO,
    ContinuedFraction,
    Rational,
    cf_from_rational,
    cw_children,
    cw_generation,
    mediant,
    rational_from_cf,
    sb_refine,
    sb_root,
    sb_unit,
)


def fold_cf(terms):
    """Independent CF evaluation: fold the terms from the right in Fractions."""
    acc = Fraction(terms[-1])
    for a in reversed(terms[:-1]):
        acc = a + 1 / acc
    return acc


class TestContinuedFractions:
    def test_hand_examples(self):
        assert cf_from_rational(Rational(2, 3)).terms == (0, 1, 2)
        assert cf_from_rational(Rational(1, 1)).terms == (1,)
        assert cf_from_rational(Rational(5, 2)).terms == (2, 2)
        assert cf_from_rational(Rational(0, 1)).terms == (0,)

    def test_inverse_examples(self):
        assert rational_from_cf(ContinuedFraction((0, 1, 2))) == Rational(2, 3)
        assert rational_from_cf(ContinuedFraction((1,))) == ONE
        assert rational_from_cf(ContinuedFraction((0, 7))) == Rational(1, 7)

    def test_round_trip_random(self, rng):
        for _ in range(2000):
            x = Rational(rng.randint(0, 10**6), rng.randint(1, 10**6))
            cf = cf_from_rational(x)
            assert rational_from_cf(cf) == x
            # canonical form and the independent Fraction oracle
            if len(cf.terms) > 1:
                assert cf.terms[-1] >= 2
            assert fold_cf(cf.terms) == x.as_fraction()

    def test_non_canonical_rejected(self):
        with pytest.raises(ValueError):
            ContinuedFraction((0, 1, 1))
        with pytest.raises(ValueError):
            ContinuedFraction(())
        with pytest.raises(ValueError):
            ContinuedFraction((1, 0, 2))

    def test_sentinel_rejected(self):
        with pytest.raises(ValueError):
            cf_from_rational(INFINITY)

    def test_convergent_overflow(self):
        with pytest.raises(OverflowError):
            rational_from_cf(ContinuedFraction((2**40, 2**40, 2)))


class TestCalkinWilf:
    def test_children_tree_rows(self):
        assert cw_children(ONE) == (Rational(1, 2), Rational(2, 1))
        assert cw_children(Rational(1, 2)) == (Rational(1, 3), Rational(3, 2))
        assert cw_children(Rational(2, 3)) == (Rational(2, 5), Rational(5, 3))

    def test_generation_small(self):
        assert list(cw_generation(1)) == [ONE]
        gen3 = set(cw_generation(3))
        assert gen3 == {Rational(1, 3), Rational(3, 2), Rational(2, 3), Rational(3, 1)}
        gen4 = set(cw_generation(4))
        assert Rational(3, 5) in gen4 and Rational(5, 2) in gen4

    def test_generation_order_deterministic(self):
        # depth-first, left to right: leftmost is 1/n, rightmost is n/1
        gen = list(cw_generation(5))
        assert gen[0] == Rational(1, 5)
        assert gen[-1] == Rational(5, 1)
        assert gen == list(cw_generation(5))

    @pytest.mark.parametrize("n", [1, 2, 3, 6, 10, 14])
    def test_generation_bijectivity(self, n):
        gen = list(cw_generation(n))
        assert len(gen) == 2 ** (n - 1)
        assert len(set(gen)) == len(gen)
        for x in gen:
            assert cf_from_rational(x).term_sum() == n

    @pytest.mark.parametrize("n", [2, 5, 9])
    def test_reciprocal_closure(self, n):
        gen = set(cw_generation(n))
        assert {x.reciprocal() for x in gen} == gen

    def test_limit_enforced(self):
        with pytest.raises(ResourceLimitError):
            next(cw_generation(31))
        # custom limits are honoured
        assert len(list(cw_generation(5, limit=5))) == 16
        with pytest.raises(ResourceLimitError):
            next(cw_generation(6, limit=5))

    def test_children_overflow(self):
        big = Rational(2**63, 2**63 + 1)  # coprime (consecutive integers)
        with pytest.raises(OverflowError):
            cw_children(big)


class TestSternBrocot:
    def test_refine_examples(self):
        a, b = sb_refine(sb_root())
        assert (a.left, a.right, a.depth) == (ZERO, ONE, 1)
        assert (b.left, b.right, b.depth) == (ONE, INFINITY, 1)
        l, r = sb_refine(sb_unit())
        assert l.right == Rational(1, 2)
        l2, r2 = sb_refine(SBI := r)
        assert SBI.left == Rational(1, 2)
        assert l2.right == Rational(2, 3)

    def test_random_descent_unimodular(self, rng):
        for _ in range(200):
            iv = sb_root()
            for _ in range(40):
                iv = sb_refine(iv)[rng.randint(0, 1)]
            assert iv.depth == 40
            det = iv.left.num * iv.right.den - iv.right.num * iv.left.den
            assert abs(det) == 1
            assert iv.left.num < 2**63 and iv.left.den < 2**63

    @pytest.mark.parametrize("depth", [1, 2, 5, 10])
    def test_tiling(self, depth):
        level = [sb_root()]
        for _ in range(depth):
            level = [child for iv in level for child in sb_refine(iv)]
        assert len(level) == 2**depth
        assert level[0].left == ZERO
        assert level[-1].right == INFINITY
        for a, b in zip(level, level[1:]):
            assert a.right == b.left

    def test_mediant(self):
        assert mediant(ZERO, INFINITY) == ONE
        assert mediant(Rational(1, 2), ONE) == Rational(2, 3)

    def test_invalid_interval_rejected(self):
        with pytest.raises(ValueError):
            # 1/3 and 2/3 have determinant 3-6... |1*3-2*3| = 3
            from minkmoments.rationals import SternBrocotInterval
            SternBrocotInterval(Rational(1, 3), Rational(2, 3), 2)


class TestRationalBasics:
    def test_parse(self):
        assert Rational.parse("3/4") == Rational(3, 4)
        assert Rational.parse("7") == Rational(7, 1)
        with pytest.raises(ValueError):
            Rational.parse("1/2/3")

    def test_lowest_terms(self):
        assert Rational(6, 4) == Rational(3, 2)
        assert Rational(0, 5).den == 1

    def test_order_with_sentinel(self):
        assert Rational(10**6, 1) < INFINITY
        assert sorted([INFINITY, ZERO, ONE]) == [ZERO, ONE, INFINITY]

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            Rational(-1, 2)
