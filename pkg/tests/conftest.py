import random

import pytest

from minkmoments.rationals import Rational


@pytest.fixture
def rng():
    return random.Random(0xFA7E)


def random_rational(rng, max_num=10**4, max_den=10**4, positive=False):
    den = rng.randint(1, max_den)
    num = rng.randint(1 if positive else 0, max_num)
    return Rational(num, den)
