import math
from fractions import Fraction

import gmpy2
import numpy as np
import pytest
from conftest import block
from hypothesis import given
from hypothesis import strategies as st

from bfpmg.bfp import (BfpBlock, BfpMatrix, epsilon, from_extfloat, from_rationals, from_values,
                       inf_norm_upper, normalize, quantize, scalar, scalar_from_value, zeros)

ints = st.lists(st.integers(-(1 << 30), 1 << 30), min_size=1, max_size=12)


def test_normalize_shifts_left():
    x = normalize(block([12, -4], 0, 8))
    assert list(x.mant) == [96, -32] and x.e == -3 and x.q == 8


def test_normalize_zero_convention():
    x = normalize(block([0, 0], 5, 4))
    assert x.e == 0 and x.is_zero()


def test_normalize_idempotent():
    x = normalize(block([12, -4], 0, 8))
    assert normalize(x) == x


def test_quantize_floor():
    x = quantize(block([23, -5], 0, 8), 4)
    assert list(x.mant) == [5, -2] and x.e == 2 and x.q == 4
    assert x.to_rational() == [20, -8]


def test_quantize_zero_block():
    assert quantize(zeros(3, 5), 4).is_zero()


@given(ints, st.integers(-20, 20))
def test_quantize_to_own_width_is_identity(m, e):
    x = normalize(block(m, e))
    if x.is_zero():
        return
    assert quantize(x, x.q) == x


@given(ints, st.integers(-20, 20), st.integers(1, 40))
def test_quantize_properties(m, e, w):
    x = block(m, e)
    z = quantize(x, w)
    ulp = Fraction(2) ** z.e
    for a, b in zip(x.to_rational(), z.to_rational()):
        assert b <= a < b + ulp
    assert z.fits()
    if not z.is_zero():
        assert z.is_normalized()


@given(ints, st.integers(-20, 20))
def test_value_preserved_by_normalize(m, e):
    x = block(m, e)
    assert normalize(x).to_rational() == x.to_rational()


def test_inf_norm_upper_examples():
    x = block([23, -5], 0, 8)
    assert inf_norm_upper(x, 16).value() == 23
    assert inf_norm_upper(x, 3).value() == 24
    assert inf_norm_upper(block([-8], 1, 4), 16).value() == 16


@given(ints, st.integers(-20, 20), st.integers(2, 20))
def test_inf_norm_upper_bounds(m, e, q):
    x = block(m, e)
    g = inf_norm_upper(x, q)
    assert g.is_normalized() and g.value() > 0
    assert g.value() >= x.inf_norm()
    if not x.is_zero():
        # tight up to one unit in the q-th bit
        assert g.value() < x.inf_norm() * (1 + Fraction(4, 2 ** q)) + Fraction(2) ** g.e


@pytest.mark.parametrize("q,eps", [(1, Fraction(1)), (5, Fraction(1, 16)), (53, Fraction(1, 2 ** 52))])
def test_epsilon(q, eps):
    assert epsilon(q) == eps


def test_epsilon_rejects_zero():
    with pytest.raises(ValueError):
        epsilon(0)


def test_to_rational_scalar():
    assert scalar(3, -2).to_rational() == [Fraction(3, 4)]


def test_from_extfloat_example():
    x = from_extfloat([1.0, -0.5], 3)
    assert list(x.mant) == [2, -1] and x.e == -1
    assert x.to_rational() == [1, Fraction(-1, 2)]


@given(ints, st.integers(-30, 30))
def test_from_extfloat_round_trip(m, e):
    x = normalize(block(m, e))
    if x.is_zero():
        return
    vals = [gmpy2.mpfr(v.numerator) / v.denominator for v in x.to_rational()]
    assert from_extfloat(vals, x.q) == x


def test_width_one_holds_only_minus_one_and_zero():
    z = from_rationals([Fraction(-3, 4)], 1)
    assert list(z.mant) == [-1] and z.e == 0


@given(st.lists(st.fractions(max_denominator=1000), min_size=1, max_size=6), st.integers(2, 30))
def test_from_rationals_is_floor(vals, w):
    z = from_rationals(vals, w)
    if z.is_zero():
        assert all(v == 0 for v in vals)
        return
    ulp = Fraction(2) ** z.e
    assert z.is_normalized()
    for v, q in zip(vals, z.to_rational()):
        assert q <= v < q + ulp


def test_scalar_from_value_round_up():
    s = scalar_from_value(Fraction(24, 17), 8, round_up=True)
    assert s.value() >= Fraction(24, 17)
    assert s.value() - Fraction(24, 17) < Fraction(2) ** s.e
    t = scalar_from_value(Fraction(24, 17), 8)
    assert t.value() <= Fraction(24, 17) < t.value() + Fraction(2) ** t.e


def test_dump_parse_round_trip():
    x = block([23, -5, 0], -3, 8)
    assert BfpBlock.parse(x.dump()) == x


def test_invariants_rejected():
    with pytest.raises(ValueError):
        BfpBlock(np.array([1], dtype=object), 0, 0)
    with pytest.raises(ValueError):
        BfpBlock(np.array([1, 2], dtype=object), 3, 0, (3,))


def test_matrix_quantize_and_dense():
    A = BfpMatrix.from_dense([[Fraction(1), Fraction(-1, 2)], [Fraction(-1, 2), Fraction(1)]])
    assert A.to_rational_dense() == [[1, Fraction(-1, 2)], [Fraction(-1, 2), 1]]
    Q = A.quantize(2)
    assert Q.is_normalized()
    assert Q.to_rational_dense() == [[1, -1], [-1, 1]]


def test_float_conversion_matches_rational():
    x = from_values([math.pi, -math.e, 0.125], 20)
    assert np.allclose(x.to_float(), [float(v) for v in x.to_rational()])
