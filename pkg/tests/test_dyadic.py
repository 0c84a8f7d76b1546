from fractions import Fraction

import numpy as np
import pytest

from walsh_quartile import exact
from walsh_quartile.dyadic import (ONE, ZERO, DyadicRational, NotDyadicError, Ordering, compare,
                                   dyadic_arith, dyadic_pow, exceeds_pow2, iroot)


def D(x):
    return DyadicRational.coerce(x)


def test_normal_form_and_equality():
    assert DyadicRational(4, -3) == DyadicRational(1, -1)
    assert hash(DyadicRational(4, -3)) == hash(D("1/2"))
    assert DyadicRational(0, 7) == ZERO


def test_arithmetic_matches_fractions():
    rng = np.random.default_rng(0)
    for _ in range(300):
        a = Fraction(int(rng.integers(-999, 999)), 2 ** int(rng.integers(0, 20)))
        b = Fraction(int(rng.integers(-999, 999)), 2 ** int(rng.integers(0, 20)))
        assert (D(a) + D(b)).to_fraction() == a + b
        assert (D(a) - D(b)).to_fraction() == a - b
        assert (D(a) * D(b)).to_fraction() == a * b
        assert (D(a) < D(b)) == (a < b)
        assert compare(a, b) == Ordering((a > b) - (a < b))


def test_dyadic_arith_ops():
    assert dyadic_arith("3/4", "1/4", "add") == ONE
    assert dyadic_arith("3/4", 3, "shift") == D(6)
    with pytest.raises(ValueError):
        dyadic_arith(1, 1, "div")


def test_non_dyadic_rejected():
    with pytest.raises(NotDyadicError):
        D(Fraction(1, 3))
    with pytest.raises(NotDyadicError):
        dyadic_pow(D(2), 1, 2)


def test_powers_and_roots():
    assert dyadic_pow(D("1/16"), 1, 4) == D("1/2")
    assert dyadic_pow(D(9), 3, 2) == D(27)
    assert iroot(10 ** 40, 4) == 10 ** 10
    assert iroot(17, 2) == 4


def test_exceeds_pow2_irrational_threshold():
    # 2^(1/2) ~ 1.41421
    assert exceeds_pow2(D("1.4375"), 1, 2)
    assert not exceeds_pow2(D("1.375"), 1, 2)
    assert not exceeds_pow2(ZERO, -5)


def test_json_round_trip():
    x = DyadicRational(-12345678901234567890123, -77)
    assert DyadicRational.from_json(x.to_json()) == x
    assert float(D("3/8")) == 0.375


def test_exact_overflow_falls_back_to_objects():
    a = np.array([2 ** 40, 3], dtype=np.int64)
    p = exact.mul(a, a)
    assert int(p[0]) == 2 ** 80
    assert exact.total(np.array([2 ** 62, 2 ** 62], dtype=np.int64)) == 2 ** 63
